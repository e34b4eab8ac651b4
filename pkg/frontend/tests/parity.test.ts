// Binding transparency: a rollout through the HTTP client must reproduce
// the native CLI scripted-policy rollout bit for bit in (observation,
// reward, done) for the same scenario, seed, and actions.

import assert from "node:assert/strict"
import { after, before, test } from "node:test"

import { UansimClient } from "../src/client.js"
import { RemoteEnv, scriptedRollout } from "../src/env.js"
import { nativeRollout, runCli, ServerHandle, startServer, stopServer,
         writeActionsFile } from "./helpers.js"

const SCENARIO = "datacollect3x25"
const SEED = 13
const STEPS = 100

let server: ServerHandle
let client: UansimClient

before(async () => {
    server = await startServer()
    client = new UansimClient(server.baseUrl)
})

after(async () => {
    await stopServer(server)
})

test("100-step rollout matches the native CLI bit for bit", async () => {
    const native = await nativeRollout(SCENARIO, SEED, STEPS)
    assert.equal(native.steps.length, STEPS)

    const env = await RemoteEnv.make(client, SCENARIO, SEED)
    const remote = await scriptedRollout(env, native.steps.map((s) => s.actions))
    await env.close()

    assert.deepStrictEqual(remote.reset, native.reset)
    assert.equal(remote.steps.length, native.steps.length)
    for (let i = 0; i < native.steps.length; i++) {
        assert.deepStrictEqual(remote.steps[i].obs, native.steps[i].obs,
                               `observations diverge at step ${i}`)
        assert.deepStrictEqual(remote.steps[i].rewards, native.steps[i].rewards,
                               `rewards diverge at step ${i}`)
        assert.equal(remote.steps[i].done, native.steps[i].done,
                     `done diverges at step ${i}`)
    }
})

test("actions-from-file CLI rollout equals the same script over HTTP", async () => {
    const script = [[0, 1, 2], [3, 4, 5], [6, 7, 8], [0, 0, 0], [8, 8, 8]]
    const actionsPath = writeActionsFile(script)
    const out = JSON.parse(await runCli(
        ["env-rollout", SCENARIO, "--seed", "31", "--actions", actionsPath]))

    const env = await RemoteEnv.make(client, SCENARIO, 31)
    const remote = await scriptedRollout(env, script)
    await env.close()

    assert.deepStrictEqual(remote.reset, out.reset)
    assert.deepStrictEqual(
        remote.steps.map((s) => [s.obs, s.rewards, s.done]),
        out.steps.map((s: { obs: number[][]; rewards: number[]; done: boolean }) =>
            [s.obs, s.rewards, s.done]))
})
