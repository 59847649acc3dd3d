/**
 * Flat-buffer bindings to the heatboxes codec.
 *
 * Every function delegates to the heatboxes CLI through its documented file
 * formats (THM1 rasters, full-precision center-form text), so results are
 * numerically identical to the primary implementation by construction. Boxes
 * travel as flat arrays of 6 values per row [cx, cy, w, h, theta, class];
 * decoded detections come back as 7 values per row
 * [cx, cy, w, h, theta, score, class]. Input buffers are never mutated.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { BindingError, checkFinite } from "./errors.js";
import { runHeatboxes, withTempDir } from "./runner.js";
import { HeatmapBuffer, checkHeatmapBuffer, decodeThm1, encodeThm1 } from "./thm1.js";

export { BindingError } from "./errors.js";
export { HeatmapBuffer, decodeThm1, encodeThm1 } from "./thm1.js";

export const BOX_STRIDE = 6;
export const DETECTION_STRIDE = 7;

export type KernelFamily = "tricube" | "gaussian" | "binary" | "effective";

export interface SceneOptions {
  width: number;
  height: number;
  channels: number;
  downsample?: number;
}

export interface EncodeOptions extends SceneOptions {
  kernel?: KernelFamily;
  gamma?: number;
}

export interface DecodeOptions {
  tau?: number;
  gamma?: number;
  minArea?: number;
  upsample?: number;
}

export interface DecodeResult {
  /** count x 7 row-major values [cx, cy, w, h, theta, score, class]. */
  data: Float64Array;
  count: number;
}

export interface LossResult {
  loss: number;
  positives: number;
  falsePositives: number;
  sampledFalsePositives: number;
}

export interface EvalOptions {
  categoriesFile: string;
  style?: "voc" | "coco";
  budget?: number;
  iouThreshold?: number;
  interpolation?: "all_points" | "eleven_point";
}

export interface EvalMetrics {
  style: string;
  images: number;
  perClassAp: Record<string, number>;
  meanAp: number;
  ap50: number;
  ap75: number;
  averageRecall: number;
}

function checkSceneOptions(opts: SceneOptions): void {
  for (const key of ["width", "height", "channels"] as const) {
    if (!Number.isInteger(opts[key]) || opts[key] < 1) {
      throw new BindingError(key, `${key} must be a positive integer, got ${opts[key]}`);
    }
  }
  const ds = opts.downsample ?? 1;
  if (!Number.isInteger(ds) || ds < 1) {
    throw new BindingError("downsample", `downsample must be a positive integer, got ${ds}`);
  }
}

/** Validate a flat box array and render it as center-form annotation text. */
function boxesToText(boxes: ArrayLike<number>, channels: number): string {
  if (boxes.length % BOX_STRIDE !== 0) {
    throw new BindingError(
      "boxes",
      `boxes length ${boxes.length} is not a multiple of ${BOX_STRIDE}`,
    );
  }
  checkFinite("boxes", boxes);
  const lines: string[] = [];
  for (let i = 0; i < boxes.length; i += BOX_STRIDE) {
    const [cx, cy, w, h, theta, cls] = [
      boxes[i], boxes[i + 1], boxes[i + 2], boxes[i + 3], boxes[i + 4], boxes[i + 5],
    ];
    if (w <= 0 || h <= 0) {
      throw new BindingError("boxes", `box ${i / BOX_STRIDE}: sides must be positive (w=${w}, h=${h})`);
    }
    if (!Number.isInteger(cls) || cls < 0 || cls >= channels) {
      throw new BindingError(
        "class",
        `box ${i / BOX_STRIDE}: class ${cls} outside [0, ${channels})`,
      );
    }
    // Number.prototype.toString round-trips IEEE doubles exactly, and the
    // CLI's obb parser reads them back bit-identically
    lines.push(`${cls} ${cx} ${cy} ${w} ${h} ${theta}`);
  }
  return lines.join("\n") + (lines.length ? "\n" : "");
}

function sceneArgs(annPath: string, opts: SceneOptions): string[] {
  return [
    "--ann", annPath,
    "--ann-format", "obb",
    "--channels", String(opts.channels),
    "--width", String(opts.width),
    "--height", String(opts.height),
    "--downsample", String(opts.downsample ?? 1),
  ];
}

/** Render boxes into a heatmap raster; mirrors the CLI `encode` command. */
export function encodeBoxes(boxes: ArrayLike<number>, opts: EncodeOptions): HeatmapBuffer {
  checkSceneOptions(opts);
  const gamma = opts.gamma ?? 7.0;
  if (!(gamma >= 1)) {
    throw new BindingError("gamma", `gamma must be >= 1, got ${gamma}`);
  }
  const text = boxesToText(boxes, opts.channels);
  return withTempDir((dir) => {
    const ann = join(dir, "ann.txt");
    const out = join(dir, "out.thm");
    writeFileSync(ann, text, "utf8");
    runHeatboxes([
      "encode", ...sceneArgs(ann, opts),
      "--kernel", opts.kernel ?? "tricube",
      "--gamma", String(gamma),
      "--out", out,
    ]);
    return decodeThm1(readFileSync(out));
  });
}

/** Per-pixel loss-weight raster for the boxes; mirrors the CLI `swm` command. */
export function makeSizeWeightMask(boxes: ArrayLike<number>, opts: SceneOptions): HeatmapBuffer {
  checkSceneOptions(opts);
  const text = boxesToText(boxes, opts.channels);
  return withTempDir((dir) => {
    const ann = join(dir, "ann.txt");
    const out = join(dir, "swm.thm");
    writeFileSync(ann, text, "utf8");
    runHeatboxes(["swm", ...sceneArgs(ann, opts), "--out", out]);
    return decodeThm1(readFileSync(out));
  });
}

/** Extract detections from a heatmap buffer; mirrors the CLI `decode` command. */
export function decodeHeatmap(buf: HeatmapBuffer, opts: DecodeOptions = {}): DecodeResult {
  checkHeatmapBuffer("heatmap", buf);
  const tau = opts.tau ?? 0.3;
  if (!(tau > 0 && tau < 1)) {
    throw new BindingError("tau", `tau out of range (0, 1): ${tau}`);
  }
  const gamma = opts.gamma ?? 7.0;
  if (!(gamma >= 1)) {
    throw new BindingError("gamma", `gamma must be >= 1, got ${gamma}`);
  }
  const minArea = opts.minArea ?? 3;
  if (!Number.isInteger(minArea) || minArea < 0) {
    throw new BindingError("minArea", `minArea must be a non-negative integer, got ${minArea}`);
  }
  const upsample = opts.upsample ?? 4;
  if (!Number.isInteger(upsample) || upsample < 1) {
    throw new BindingError("upsample", `upsample must be a positive integer, got ${upsample}`);
  }
  return withTempDir((dir) => {
    const heatmapPath = join(dir, "in.thm");
    const detsPath = join(dir, "dets.txt");
    writeFileSync(heatmapPath, encodeThm1(buf));
    runHeatboxes([
      "decode",
      "--heatmap", heatmapPath,
      "--tau", String(tau),
      "--gamma", String(gamma),
      "--min-area", String(minArea),
      "--upsample", String(upsample),
      "--format", "obb",
      "--out", detsPath,
    ]);
    const lines = readFileSync(detsPath, "utf8").split("\n").filter((l) => l.trim() !== "");
    const data = new Float64Array(lines.length * DETECTION_STRIDE);
    lines.forEach((line, row) => {
      const parts = line.trim().split(/\s+/);
      if (parts.length !== 7) {
        throw new BindingError("backend", `unexpected detection line: ${line}`);
      }
      // CLI order: class score cx cy w h theta -> rows [cx cy w h theta score class]
      const [cls, score, cx, cy, w, h, theta] = parts.map(Number);
      const base = row * DETECTION_STRIDE;
      data[base] = cx;
      data[base + 1] = cy;
      data[base + 2] = w;
      data[base + 3] = h;
      data[base + 4] = theta;
      data[base + 5] = score;
      data[base + 6] = cls;
    });
    return { data, count: lines.length };
  });
}

/** Polygon IoU of two convex quads given as 8 coordinates each. */
export function polygonIou(a: ArrayLike<number>, b: ArrayLike<number>): number {
  for (const [field, quad] of [["a", a], ["b", b]] as const) {
    if (quad.length !== 8) {
      throw new BindingError(field, `${field} must hold 8 coordinates, got ${quad.length}`);
    }
    checkFinite(field, quad);
  }
  const toText = (q: ArrayLike<number>) => Array.from(q, (v) => String(v)).join(" ");
  const stdout = runHeatboxes(["iou", "--a", toText(a), "--b", toText(b), "--json"]);
  return JSON.parse(stdout).iou as number;
}

/**
 * Hard-pixel-sampled, size-weighted MSE between two heatmaps.
 *
 * `boxes` describe the ground-truth scene so the weight mask can be built;
 * mirrors the CLI `loss` command (fpem sampling + masked MSE).
 */
export function fpemLoss(
  pred: HeatmapBuffer,
  gt: HeatmapBuffer,
  boxes: ArrayLike<number>,
  ratio = 3,
): LossResult {
  checkHeatmapBuffer("pred", pred);
  checkHeatmapBuffer("gt", gt);
  if (
    pred.width !== gt.width || pred.height !== gt.height || pred.channels !== gt.channels
  ) {
    throw new BindingError("pred", "pred and gt dims differ");
  }
  if (!Number.isInteger(ratio) || ratio < 1) {
    throw new BindingError("ratio", `ratio must be a positive integer, got ${ratio}`);
  }
  const text = boxesToText(boxes, gt.channels);
  return withTempDir((dir) => {
    const predPath = join(dir, "pred.thm");
    const gtPath = join(dir, "gt.thm");
    const ann = join(dir, "ann.txt");
    writeFileSync(predPath, encodeThm1(pred));
    writeFileSync(gtPath, encodeThm1(gt));
    writeFileSync(ann, text, "utf8");
    const stdout = runHeatboxes([
      "loss",
      "--pred", predPath,
      "--gt", gtPath,
      "--ann", ann,
      "--ann-format", "obb",
      "--channels", String(gt.channels),
      "--downsample", "1",
      "--ratio", String(ratio),
      "--json",
    ]);
    const payload = JSON.parse(stdout);
    return {
      loss: payload.loss,
      positives: payload.positives,
      falsePositives: payload.false_positives,
      sampledFalsePositives: payload.sampled_false_positives,
    };
  });
}

/** Score detection files against ground truth; mirrors the CLI `eval` command. */
export function evaluateDetections(
  detsDir: string,
  gtDir: string,
  opts: EvalOptions,
): EvalMetrics {
  const style = opts.style ?? "voc";
  const budget = opts.budget ?? 300;
  if (!Number.isInteger(budget) || budget < 1) {
    throw new BindingError("budget", `budget must be a positive integer, got ${budget}`);
  }
  const stdout = runHeatboxes([
    "eval",
    "--dets", detsDir,
    "--gt", gtDir,
    "--categories", opts.categoriesFile,
    "--style", style,
    "--budget", String(budget),
    "--iou", String(opts.iouThreshold ?? 0.5),
    "--interp", opts.interpolation ?? "all_points",
    "--json",
  ]);
  const payload = JSON.parse(stdout);
  return {
    style: payload.style,
    images: payload.images,
    perClassAp: payload.per_class_ap,
    meanAp: payload.mAP,
    ap50: payload.AP50,
    ap75: payload.AP75,
    averageRecall: payload[`AR${budget}`],
  };
}
