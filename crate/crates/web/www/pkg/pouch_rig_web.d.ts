/* tslint:disable */
/* eslint-disable */

/**
 * Sampled traces: a time axis plus one column per series.
 */
export class Traces {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * The logged CSV, empty for step responses.
     */
    csv(): string;
    seriesCount(): number;
    series(index: number): Float64Array;
    time(): Float64Array;
}

export function presetNames(): string;

/**
 * Canonical text of a built-in program.
 */
export function presetText(name: string): string;

/**
 * Runs `.seq` source (or `preset:NAME`) on a freshly started rig and
 * returns the logged pressures, one series per channel. Errors carry the
 * diagnostics, one per line.
 */
export function runProgram(source: string, seconds: number, rate: number, seed: bigint): Traces;

/**
 * Channel 1 stepped to `kpa` from rest. Series 0 is the simulated gauge,
 * series 1 the first-order closed form with the same conductances.
 */
export function stepResponse(kpa: number, vent_open: boolean, ideal_regulator: boolean, seconds: number): Traces;

/**
 * Square wave over comma-separated channels, rendered as `.seq` text.
 */
export function waveProgram(channels: string, period: number, high_kpa: number, duty: number, phase_frac: number, cycles: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_traces_free: (a: number, b: number) => void;
    readonly presetNames: () => [number, number];
    readonly presetText: (a: number, b: number) => [number, number, number, number];
    readonly runProgram: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly stepResponse: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly traces_csv: (a: number) => [number, number];
    readonly traces_series: (a: number, b: number) => [number, number];
    readonly traces_seriesCount: (a: number) => number;
    readonly traces_time: (a: number) => [number, number];
    readonly waveProgram: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
