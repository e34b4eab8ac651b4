// Wire types mirroring the service's request/response models.

export interface HealthResponse {
    status: string
    version: string
}

export interface Table1Row {
    protocol: string
    kind: string
    header_bytes: number
    tx_delay_s: number
}

export interface Table1Response {
    rate_bps: number
    rows: Table1Row[]
}

export interface RunRequest {
    scenario: string
    seed?: number
    overrides?: Record<string, unknown>
    include_trace?: boolean
    max_trace_records?: number
}

export interface RunResponse {
    scenario: string
    seed: number
    final_time_s: number
    events_executed: number
    metrics: Record<string, unknown>
    trace: Record<string, unknown>[] | null
}

export interface EnvCreateRequest {
    scenario: string
    seed?: number
    overrides?: Record<string, unknown>
}

export interface ObservationSpec {
    agents: number[]
    length: number
    names: string[]
    sensors: number
}

export interface ActionSpec {
    n: number
    names: string[]
    agents: number[]
}

export interface EnvCreateResponse {
    env_id: string
    observation_spec: ObservationSpec
    action_spec: ActionSpec
}

export interface StepResponse {
    observations: number[][]
    rewards: number[]
    done: boolean
    info: Record<string, unknown>
}

export class ServiceError extends Error {
    constructor(readonly status: number, readonly detail: string) {
        super(`service error ${status}: ${detail}`)
        this.name = "ServiceError"
    }
}
