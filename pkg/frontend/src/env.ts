import { UansimClient } from "./client.js"
import { ActionSpec, ObservationSpec, ServiceError, StepResponse } from "./types.js"

export interface EnvStep {
    observations: number[][]
    rewards: number[]
    done: boolean
    info: Record<string, unknown>
}

/**
 * One remote environment session.  The handle owns exactly one server-side
 * instance; calls after close() reject with a ServiceError.
 */
export class RemoteEnv {
    private constructor(
        private readonly client: UansimClient,
        readonly envId: string,
        readonly observationSpec: ObservationSpec,
        readonly actionSpec: ActionSpec,
    ) {}

    static async make(client: UansimClient, scenario: string, seed = 0,
                      overrides: Record<string, unknown> = {}): Promise<RemoteEnv> {
        const created = await client.createEnv({ scenario, seed, overrides })
        return new RemoteEnv(client, created.env_id, created.observation_spec,
                             created.action_spec)
    }

    async reset(seed?: number): Promise<number[][]> {
        const body = await this.client.reset(this.envId, seed)
        return body.observations
    }

    async step(actions: number[]): Promise<EnvStep> {
        if (actions.length !== this.actionSpec.agents.length) {
            throw new ServiceError(0,
                `need ${this.actionSpec.agents.length} actions, got ${actions.length}`)
        }
        const body: StepResponse = await this.client.step(this.envId, actions)
        return body
    }

    close(): Promise<void> {
        return this.client.closeEnv(this.envId)
    }
}

/** reset + fixed action script; mirrors the native scripted-policy runner. */
export async function scriptedRollout(env: RemoteEnv, actions: number[][]) {
    const reset = await env.reset()
    const steps = []
    for (const row of actions) {
        const result = await env.step(row)
        steps.push({
            actions: row,
            obs: result.observations,
            rewards: result.rewards,
            done: result.done,
        })
        if (result.done) {
            break
        }
    }
    return { reset, steps }
}
