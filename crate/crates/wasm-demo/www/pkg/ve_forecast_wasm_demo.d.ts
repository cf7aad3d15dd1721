/* tslint:disable */
/* eslint-disable */

/**
 * Gates and similarity of a row-major `k × C` embedding.
 */
export function gateView(logits: Float64Array, k: number, channels: number): string;

/**
 * Expert rank and parameter counts of the three head variants.
 */
export function headBudget(channels: number, input_dim: number, horizon: number, k: number, p: number, complex: boolean): string;

/**
 * A random `k × C` embedding with standard deviation `scale`, row-major.
 */
export function randomEmbedding(k: number, channels: number, scale: number, seed: bigint): Float64Array;

export function trainGrouped(rows_count: number, lookback: number, horizon: number, epochs: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly gateView: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly headBudget: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly randomEmbedding: (a: number, b: number, c: number, d: bigint) => [number, number];
    readonly trainGrouped: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
