/**
 * Typed-array bindings for the polarbox oriented-box kernels.
 *
 * Every function marshals plain contiguous arrays into the CLI's documented
 * file formats, invokes the CLI, and parses the result back.  No numeric
 * logic lives here: values are produced by the same kernels the Python
 * package runs, so outputs are bit-identical to direct CLI use.
 *
 * The Python entry point defaults to `python3 -m polarbox` and can be
 * overridden with the POLARBOX_PYTHON environment variable.
 */

import { spawnSync } from "node:child_process";
import {
  mkdirSync,
  mkdtempSync,
  readFileSync,
  rmSync,
  writeFileSync,
} from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export const MAP_ORDER = [
  "heatmap",
  "offset",
  "angles",
  "shorter",
  "ratios",
  "semantic",
] as const;
export type MapName = (typeof MAP_ORDER)[number];

const CODE_CSV_HEADER =
  "category,difficult,center_x,center_y,offset_x,offset_y," +
  "theta_1,theta_2,theta_3,theta_4,shorter,ratio_1,ratio_2,ratio_3,ratio_4";

/** Raised when the CLI exits non-zero; carries its exit code and stderr. */
export class CliError extends Error {
  constructor(
    message: string,
    public readonly exitCode: number,
    public readonly stderr: string,
  ) {
    super(`${message} (exit ${exitCode}): ${stderr.trim()}`);
    this.name = "CliError";
  }
}

export interface PolarCodes {
  count: number;
  categories: string[];
  difficult: Uint8Array;
  /** interleaved (x, y), length 2N */
  center: Float64Array;
  /** interleaved (dx, dy) cell fractions, length 2N */
  offset: Float64Array;
  /** four ascending angles per box, length 4N */
  theta: Float64Array;
  /** shorter MBR side per box, length N */
  shorter: Float64Array;
  /** four ratios per box, length 4N */
  ratio: Float64Array;
}

export interface TargetMaps {
  classes: string[];
  stride: number;
  width: number;
  height: number;
  skipped: number;
  shapes: Record<MapName, number[]>;
  maps: Record<MapName, Float32Array>;
}

export interface HeadLosses {
  total: number;
  heatmap: number;
  offset: number;
  angles: number;
  shorter: number;
  ratios: number;
  semantic: number;
}

export interface NmsResult {
  /** input positions of the kept detections, in keep (score) order */
  keepIndices: Int32Array;
  scores: Float64Array;
  quads: Float64Array;
}

export interface EvalOutcome {
  perClass: Record<string, number>;
  mAP: number;
}

// ------------------------------------------------------------------ plumbing

function pythonArgv(): string[] {
  const override = process.env.POLARBOX_PYTHON;
  if (override && override.length > 0) {
    return [...override.split(" "), "-m", "polarbox"];
  }
  return ["python3", "-m", "polarbox"];
}

/** Run one polarbox subcommand; exported so tests can drive the CLI directly. */
export function runCli(args: string[]): string {
  const [cmd, ...base] = pythonArgv();
  const proc = spawnSync(cmd, [...base, ...args], {
    encoding: "utf-8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) {
    throw proc.error;
  }
  if (proc.status !== 0) {
    throw new CliError(`polarbox ${args[0]} failed`, proc.status ?? -1, proc.stderr);
  }
  return proc.stdout;
}

function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "polarbox-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/** Fixed-decimal formatting matching the CLI's text conventions. */
export function fixed(value: number, decimals: number): string {
  if (!Number.isFinite(value)) {
    throw new RangeError(`cannot format non-finite value ${value}`);
  }
  return (value === 0 ? 0 : value).toFixed(decimals);
}

function checkQuads(name: string, quads: ArrayLike<number>): number {
  if (quads.length === 0 || quads.length % 8 !== 0) {
    throw new RangeError(
      `${name} must hold N*8 coordinates, got length ${quads.length}`,
    );
  }
  return quads.length / 8;
}

function checkLength(name: string, arr: ArrayLike<unknown>, want: number): void {
  if (arr.length !== want) {
    throw new RangeError(`${name} must have length ${want}, got ${arr.length}`);
  }
}

/** DOTA-style annotation text (6-decimal coordinates). */
export function formatAnnotationFile(
  quads: ArrayLike<number>,
  categories: string[],
  difficult?: ArrayLike<number>,
): string {
  const n = checkQuads("quads", quads);
  checkLength("categories", categories, n);
  const lines: string[] = [];
  for (let i = 0; i < n; i++) {
    const coords: string[] = [];
    for (let k = 0; k < 8; k++) {
      coords.push(fixed(quads[i * 8 + k], 6));
    }
    const flag = difficult && difficult[i] ? 1 : 0;
    lines.push(`${coords.join(" ")} ${categories[i]} ${flag}`);
  }
  return lines.length ? lines.join("\n") + "\n" : "";
}

/** Task1-style result text (4-decimal scores, 2-decimal coordinates). */
export function formatResultFile(
  images: string[],
  scores: ArrayLike<number>,
  quads: ArrayLike<number>,
): string {
  const n = checkQuads("quads", quads);
  checkLength("images", images, n);
  checkLength("scores", scores, n);
  const lines: string[] = [];
  for (let i = 0; i < n; i++) {
    const coords: string[] = [];
    for (let k = 0; k < 8; k++) {
      coords.push(fixed(quads[i * 8 + k], 2));
    }
    lines.push(`${images[i]} ${fixed(scores[i], 4)} ${coords.join(" ")}`);
  }
  return lines.length ? lines.join("\n") + "\n" : "";
}

function parseResultText(text: string): {
  images: string[];
  scores: Float64Array;
  quads: Float64Array;
  lines: string[];
} {
  const lines = text.split("\n").filter((line) => line.trim().length > 0);
  const images: string[] = [];
  const scores = new Float64Array(lines.length);
  const quads = new Float64Array(lines.length * 8);
  lines.forEach((line, i) => {
    const tokens = line.trim().split(/\s+/);
    if (tokens.length !== 10) {
      throw new CliError(`unparseable result line: ${line}`, -1, "");
    }
    images.push(tokens[0]);
    scores[i] = Number(tokens[1]);
    for (let k = 0; k < 8; k++) {
      quads[i * 8 + k] = Number(tokens[2 + k]);
    }
  });
  return { images, scores, quads, lines };
}

export function parseMapsDump(buf: Buffer): TargetMaps {
  const newline = buf.indexOf(0x0a);
  const header = JSON.parse(buf.subarray(0, newline).toString("utf-8"));
  const shapes = header.shapes as Record<MapName, number[]>;
  const maps = {} as Record<MapName, Float32Array>;
  let cursor = newline + 1;
  for (const name of header.maps as MapName[]) {
    const count = shapes[name].reduce((a, b) => a * b, 1);
    const bytes = buf.subarray(cursor, cursor + count * 4);
    if (bytes.length !== count * 4) {
      throw new CliError(`dump truncated in map ${name}`, -1, "");
    }
    // payload is little-endian float32; Buffer.buffer may be offset
    maps[name] = new Float32Array(
      bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.length),
    );
    cursor += count * 4;
  }
  return {
    classes: header.classes,
    stride: header.stride,
    width: header.width,
    height: header.height,
    skipped: header.skipped ?? 0,
    shapes,
    maps,
  };
}

/** Serialize TargetMaps back into the dump format the CLI reads. */
export function writeMapsDump(maps: TargetMaps): Buffer {
  const shapes: Record<string, number[]> = {};
  for (const name of [...MAP_ORDER].sort()) {
    shapes[name] = maps.shapes[name as MapName];
  }
  const header = {
    classes: maps.classes,
    height: maps.height,
    maps: [...MAP_ORDER],
    shapes,
    skipped: maps.skipped,
    stride: maps.stride,
    width: maps.width,
  };
  const parts: Buffer[] = [Buffer.from(JSON.stringify(header) + "\n", "utf-8")];
  for (const name of MAP_ORDER) {
    const arr = maps.maps[name];
    const want = maps.shapes[name].reduce((a, b) => a * b, 1);
    checkLength(`maps.${name}`, arr, want);
    parts.push(Buffer.from(arr.buffer, arr.byteOffset, arr.byteLength));
  }
  return Buffer.concat(parts);
}

// ------------------------------------------------------------------- encode

export function encodePolar(
  quads: ArrayLike<number>,
  options: {
    stride?: number;
    categories?: string[];
    difficult?: ArrayLike<number>;
  } = {},
): PolarCodes {
  const n = checkQuads("quads", quads);
  const stride = options.stride ?? 4;
  const categories = options.categories ?? new Array(n).fill("obj");
  checkLength("categories", categories, n);
  return withTempDir((dir) => {
    const annPath = join(dir, "ann.txt");
    const outPath = join(dir, "codes.csv");
    writeFileSync(
      annPath,
      formatAnnotationFile(quads, categories, options.difficult),
    );
    runCli(["encode", annPath, "--stride", String(stride), "-o", outPath]);
    return parseCodesCsv(readFileSync(outPath, "utf-8"));
  });
}

function parseCodesCsv(text: string): PolarCodes {
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines[0] !== CODE_CSV_HEADER) {
    throw new CliError("unexpected polar-code CSV header", -1, lines[0] ?? "");
  }
  const n = lines.length - 1;
  const out: PolarCodes = {
    count: n,
    categories: [],
    difficult: new Uint8Array(n),
    center: new Float64Array(2 * n),
    offset: new Float64Array(2 * n),
    theta: new Float64Array(4 * n),
    shorter: new Float64Array(n),
    ratio: new Float64Array(4 * n),
  };
  for (let i = 0; i < n; i++) {
    const fields = lines[i + 1].split(",");
    out.categories.push(fields[0]);
    out.difficult[i] = fields[1] === "1" ? 1 : 0;
    const nums = fields.slice(2).map(Number);
    out.center.set(nums.slice(0, 2), 2 * i);
    out.offset.set(nums.slice(2, 4), 2 * i);
    out.theta.set(nums.slice(4, 8), 4 * i);
    out.shorter[i] = nums[8];
    out.ratio.set(nums.slice(9, 13), 4 * i);
  }
  return out;
}

export function formatCodesCsv(codes: PolarCodes): string {
  const lines = [CODE_CSV_HEADER];
  for (let i = 0; i < codes.count; i++) {
    const values = [
      codes.center[2 * i],
      codes.center[2 * i + 1],
      codes.offset[2 * i],
      codes.offset[2 * i + 1],
      codes.theta[4 * i],
      codes.theta[4 * i + 1],
      codes.theta[4 * i + 2],
      codes.theta[4 * i + 3],
      codes.shorter[i],
      codes.ratio[4 * i],
      codes.ratio[4 * i + 1],
      codes.ratio[4 * i + 2],
      codes.ratio[4 * i + 3],
    ];
    const rendered = values.map((v) => fixed(v, 6)).join(",");
    lines.push(`${codes.categories[i]},${codes.difficult[i]},${rendered}`);
  }
  return lines.join("\n") + "\n";
}

export function decodePolar(
  codes: PolarCodes,
  options: { stride?: number } = {},
): { quads: Float64Array; categories: string[]; difficult: Uint8Array } {
  const stride = options.stride ?? 4;
  return withTempDir((dir) => {
    const csvPath = join(dir, "codes.csv");
    const outPath = join(dir, "ann.txt");
    writeFileSync(csvPath, formatCodesCsv(codes));
    runCli(["decode", csvPath, "--stride", String(stride), "-o", outPath]);
    const lines = readFileSync(outPath, "utf-8")
      .split("\n")
      .filter((line) => line.trim().length > 0);
    const quads = new Float64Array(lines.length * 8);
    const categories: string[] = [];
    const difficult = new Uint8Array(lines.length);
    lines.forEach((line, i) => {
      const tokens = line.trim().split(/\s+/);
      for (let k = 0; k < 8; k++) {
        quads[i * 8 + k] = Number(tokens[k]);
      }
      categories.push(tokens[8]);
      difficult[i] = tokens[9] === "1" ? 1 : 0;
    });
    return { quads, categories, difficult };
  });
}

// ------------------------------------------------------------------ targets

export function buildTargets(
  quads: ArrayLike<number>,
  classIds: ArrayLike<number>,
  options: { classes: string[]; width: number; height: number; stride?: number },
): TargetMaps {
  const n = checkQuads("quads", quads);
  checkLength("classIds", classIds, n);
  const categories: string[] = [];
  for (let i = 0; i < n; i++) {
    const id = classIds[i];
    if (!Number.isInteger(id) || id < 0 || id >= options.classes.length) {
      throw new RangeError(`classIds[${i}] = ${id} outside the class list`);
    }
    categories.push(options.classes[id]);
  }
  return withTempDir((dir) => {
    const annPath = join(dir, "ann.txt");
    const outPath = join(dir, "maps.bin");
    writeFileSync(annPath, formatAnnotationFile(quads, categories));
    runCli([
      "targets",
      annPath,
      "--width",
      String(options.width),
      "--height",
      String(options.height),
      "--classes",
      options.classes.join(","),
      "--stride",
      String(options.stride ?? 4),
      "-o",
      outPath,
    ]);
    return parseMapsDump(readFileSync(outPath));
  });
}

// ------------------------------------------------------------------- losses

export function headLosses(pred: TargetMaps, target: TargetMaps): HeadLosses {
  return withTempDir((dir) => {
    const predPath = join(dir, "pred.bin");
    const targetPath = join(dir, "target.bin");
    writeFileSync(predPath, writeMapsDump(pred));
    writeFileSync(targetPath, writeMapsDump(target));
    const stdout = runCli(["loss", predPath, targetPath]);
    return JSON.parse(stdout) as HeadLosses;
  });
}

// -------------------------------------------------------------------- fuse

export function fuseCenterSemantic(maps: TargetMaps): {
  shape: number[];
  values: Float32Array;
} {
  return withTempDir((dir) => {
    const inPath = join(dir, "maps.bin");
    const outPath = join(dir, "fused.bin");
    writeFileSync(inPath, writeMapsDump(maps));
    runCli(["fuse", inPath, "-o", outPath]);
    const buf = readFileSync(outPath);
    const newline = buf.indexOf(0x0a);
    const header = JSON.parse(buf.subarray(0, newline).toString("utf-8"));
    const bytes = buf.subarray(newline + 1);
    return {
      shape: header.shape as number[],
      values: new Float32Array(
        bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.length),
      ),
    };
  });
}

// --------------------------------------------------------------------- nms

export function rotatedNms(
  scores: ArrayLike<number>,
  quads: ArrayLike<number>,
  options: { iouThreshold?: number } = {},
): NmsResult {
  const n = checkQuads("quads", quads);
  checkLength("scores", scores, n);
  const threshold = options.iouThreshold ?? 0.5;
  const images = new Array<string>(n).fill("im");
  const inputText = formatResultFile(images, scores, quads);
  const inputLines = inputText.split("\n").filter((l) => l.length > 0);
  return withTempDir((dir) => {
    const inPath = join(dir, "dets.txt");
    const outPath = join(dir, "kept.txt");
    writeFileSync(inPath, inputText);
    runCli(["nms", inPath, "--iou-thresh", String(threshold), "-o", outPath]);
    const kept = parseResultText(readFileSync(outPath, "utf-8"));
    // recover input positions by exact formatted-line match (first unused);
    // unambiguous whenever formatted lines are distinct
    const used = new Set<number>();
    const keepIndices = new Int32Array(kept.lines.length);
    kept.lines.forEach((line, i) => {
      let found = -1;
      for (let j = 0; j < inputLines.length; j++) {
        if (!used.has(j) && inputLines[j] === line) {
          found = j;
          break;
        }
      }
      if (found < 0) {
        throw new CliError(`kept line not found among inputs: ${line}`, -1, "");
      }
      used.add(found);
      keepIndices[i] = found;
    });
    return { keepIndices, scores: kept.scores, quads: kept.quads };
  });
}

// -------------------------------------------------------------------- eval

export interface GroundTruthImage {
  quads: ArrayLike<number>;
  categories: string[];
  difficult?: ArrayLike<number>;
}

export interface ClassDetections {
  images: string[];
  scores: ArrayLike<number>;
  quads: ArrayLike<number>;
}

export function evaluateObbMap(
  gtByImage: Record<string, GroundTruthImage>,
  detsByClass: Record<string, ClassDetections>,
  options: { metric?: "voc07" | "all"; iouThreshold?: number; classes?: string[] } = {},
): EvalOutcome {
  return withTempDir((dir) => {
    const gtDir = join(dir, "gt");
    const detDir = join(dir, "results");
    mkdirSync(gtDir);
    mkdirSync(detDir);
    for (const [image, gt] of Object.entries(gtByImage)) {
      writeFileSync(
        join(gtDir, `${image}.txt`),
        formatAnnotationFile(gt.quads, gt.categories, gt.difficult),
      );
    }
    for (const [name, dets] of Object.entries(detsByClass)) {
      writeFileSync(
        join(detDir, `Task1_${name}.txt`),
        formatResultFile(dets.images, dets.scores, dets.quads),
      );
    }
    const csvPath = join(dir, "ap.csv");
    const args = [
      "eval",
      "--gt-dir",
      gtDir,
      "--det-dir",
      detDir,
      "--metric",
      options.metric ?? "voc07",
      "--iou",
      String(options.iouThreshold ?? 0.5),
      "--csv",
      csvPath,
    ];
    if (options.classes) {
      args.push("--classes", options.classes.join(","));
    }
    runCli(args);
    return parseApCsv(readFileSync(csvPath, "utf-8"));
  });
}

export function parseApCsv(text: string): EvalOutcome {
  const lines = text.trim().split("\n");
  if (lines[0] !== "class,ap") {
    throw new CliError("unexpected AP CSV header", -1, lines[0] ?? "");
  }
  const perClass: Record<string, number> = {};
  let mAP = 0;
  for (const line of lines.slice(1)) {
    const [name, value] = line.split(",");
    if (name === "mAP") {
      mAP = Number(value);
    } else {
      perClass[name] = Number(value);
    }
  }
  return { perClass, mAP };
}
