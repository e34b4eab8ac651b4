export { UansimClient } from "./client.js"
export { RemoteEnv, scriptedRollout } from "./env.js"
export type { EnvStep } from "./env.js"
export * from "./types.js"
