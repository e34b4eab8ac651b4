import { ChildProcess, execFile, spawn } from "node:child_process"
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs"
import { tmpdir } from "node:os"
import { join } from "node:path"

const PYTHON = process.env.UANSIM_PYTHON ?? "python3"

export interface ServerHandle {
    proc: ChildProcess
    baseUrl: string
}

export async function startServer(timeoutMs = 40_000): Promise<ServerHandle> {
    const port = 20000 + Math.floor(Math.random() * 20000)
    const proc = spawn(PYTHON, ["-m", "uansim.cli", "serve", "--port", String(port)],
                       { stdio: ["ignore", "pipe", "pipe"] })
    let stderr = ""
    proc.stderr?.on("data", (chunk) => { stderr += String(chunk) })
    const baseUrl = `http://127.0.0.1:${port}`
    const deadline = Date.now() + timeoutMs
    while (Date.now() < deadline) {
        if (proc.exitCode !== null) {
            throw new Error(`server exited early (${proc.exitCode}): ${stderr}`)
        }
        try {
            const response = await fetch(`${baseUrl}/health`)
            if (response.ok) {
                return { proc, baseUrl }
            }
        } catch {
            // not listening yet
        }
        await new Promise((resolve) => setTimeout(resolve, 150))
    }
    proc.kill()
    throw new Error(`server did not come up within ${timeoutMs} ms: ${stderr}`)
}

export function stopServer(handle: ServerHandle): Promise<void> {
    return new Promise((resolve) => {
        handle.proc.once("exit", () => resolve())
        handle.proc.kill("SIGTERM")
        setTimeout(() => {
            if (handle.proc.exitCode === null) {
                handle.proc.kill("SIGKILL")
            }
        }, 3000)
    })
}

export function runCli(args: string[]): Promise<string> {
    return new Promise((resolve, reject) => {
        execFile(PYTHON, ["-m", "uansim.cli", ...args],
                 { maxBuffer: 64 * 1024 * 1024 },
                 (error, stdout, stderr) => {
                     if (error) {
                         reject(new Error(`cli failed: ${stderr || error.message}`))
                     } else {
                         resolve(stdout)
                     }
                 })
    })
}

export interface NativeRollout {
    reset: number[][]
    steps: { actions: number[]; obs: number[][]; rewards: number[]; done: boolean }[]
}

/** Native scripted-policy rollout via the CLI, parsed from its JSON output. */
export async function nativeRollout(scenario: string, seed: number,
                                    steps: number): Promise<NativeRollout> {
    const dir = mkdtempSync(join(tmpdir(), "uansim-"))
    const out = join(dir, "rollout.json")
    await runCli(["env-rollout", scenario, "--seed", String(seed),
                  "--steps", String(steps), "--out", out])
    return JSON.parse(readFileSync(out, "utf-8")) as NativeRollout
}

export function writeActionsFile(actions: number[][]): string {
    const dir = mkdtempSync(join(tmpdir(), "uansim-actions-"))
    const path = join(dir, "actions.txt")
    writeFileSync(path, actions.map((row) => row.join(" ")).join("\n") + "\n")
    return path
}
