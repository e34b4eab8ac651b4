import {
    EnvCreateRequest,
    EnvCreateResponse,
    HealthResponse,
    RunRequest,
    RunResponse,
    ServiceError,
    StepResponse,
    Table1Response,
} from "./types.js"

/** Thin fetch-based client for the simulation service. */
export class UansimClient {
    constructor(readonly baseUrl: string) {
        this.baseUrl = baseUrl.replace(/\/+$/, "")
    }

    private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
        const response = await fetch(this.baseUrl + path, {
            method,
            headers: body === undefined ? undefined : { "content-type": "application/json" },
            body: body === undefined ? undefined : JSON.stringify(body),
        })
        if (response.status === 204) {
            return undefined as T
        }
        const text = await response.text()
        if (!response.ok) {
            let detail = text
            try {
                detail = JSON.parse(text).detail ?? text
            } catch {
                // non-JSON error body: report it verbatim
            }
            throw new ServiceError(response.status, String(detail))
        }
        return JSON.parse(text) as T
    }

    health(): Promise<HealthResponse> {
        return this.request("GET", "/health")
    }

    table1(rateBps = 500): Promise<Table1Response> {
        return this.request("GET", `/table1?rate_bps=${rateBps}`)
    }

    runScenario(req: RunRequest): Promise<RunResponse> {
        return this.request("POST", "/runs", req)
    }

    createEnv(req: EnvCreateRequest): Promise<EnvCreateResponse> {
        return this.request("POST", "/envs", req)
    }

    envSpec(envId: string): Promise<EnvCreateResponse> {
        return this.request("GET", `/envs/${envId}/spec`)
    }

    reset(envId: string, seed?: number): Promise<{ observations: number[][] }> {
        return this.request("POST", `/envs/${envId}/reset`, seed === undefined ? {} : { seed })
    }

    step(envId: string, actions: number[]): Promise<StepResponse> {
        return this.request("POST", `/envs/${envId}/step`, { actions })
    }

    closeEnv(envId: string): Promise<void> {
        return this.request("DELETE", `/envs/${envId}`)
    }
}
