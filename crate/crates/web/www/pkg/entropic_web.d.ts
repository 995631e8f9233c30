/* tslint:disable */
/* eslint-disable */

/**
 * Log-price density evolved from a point mass at `ln spot`, with the
 * exact lognormal law for comparison.
 */
export class DensityView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly exact: Float64Array;
    readonly l1: number;
    readonly numeric: Float64Array;
    readonly x: Float64Array;
}

export function compareMethods(spot: number, strike: number, rate: number, vol: number, expiry: number, call: boolean, mc_paths: number, seed: number): Float64Array;

export function evolveDensity(spot: number, mu: number, vol: number, t_final: number, n_grid: number, n_steps: number): DensityView;

export function samplePaths(spot: number, mu: number, vol: number, horizon: number, steps: number, paths: number, seed: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_densityview_free: (a: number, b: number) => void;
    readonly compareMethods: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly densityview_exact: (a: number) => [number, number];
    readonly densityview_l1: (a: number) => number;
    readonly densityview_numeric: (a: number) => [number, number];
    readonly densityview_x: (a: number) => [number, number];
    readonly evolveDensity: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly samplePaths: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
