/** One (recall, value) pair of an interpolated metric curve. */
export type CurvePoint = [number, number];

/** Per-metric curves keyed "ap_2d" | "ap_bev" | "ap_3d" | "aos" | "ads". */
export type CurveSet = Record<string, CurvePoint[]>;

/** One class/difficulty cell of the evaluation report. */
export interface MetricCell {
  ap_2d: number;
  ap_bev: number;
  ap_3d: number;
  aos: number;
  ads: number;
  curves: CurveSet;
}

/** AP_3D/ADS pair for one visibility bucket. */
export interface OcclusionCell {
  ap_3d: number;
  ads: number;
}

/**
 * Parsed machine report. This mirrors the CLI's report.json byte for byte
 * after JSON parsing: the keys and nesting are exactly what `mono3d evaluate
 * --out` writes, so a report obtained here and one read from disk compare
 * deep-equal for identical inputs.
 */
export interface BoundReport {
  recall_points: number;
  classes: Record<string, Record<string, MetricCell>>;
  occlusion: Record<string, Record<string, OcclusionCell>>;
}

/** Options mapped onto `mono3d evaluate` flags. */
export interface EvaluateOptions {
  /** Restrict scoring to these classes (default: all in the ground truth). */
  classes?: string[];
  difficulties?: string[];
  recallPoints?: number;
  /** Single global threshold or per-class overrides, per matching kind. */
  iou2d?: number | Record<string, number>;
  iouBev?: number | Record<string, number>;
  iou3d?: number | Record<string, number>;
  /** Skip the visibility-bucket analysis. */
  noOcclusion?: boolean;
  jobs?: number;
  /** Keep the CLI's report.json / summary.csv / curves under this directory. */
  outDir?: string;
}

/** Camera calibration as plain nested arrays (row major). */
export interface Calibration {
  /** P2, 3x4. */
  projection: number[][];
  /** R0_rect, 3x3. */
  rect: number[][];
  /** Tr_velo_to_cam, 3x4. */
  velo_to_cam: number[][];
}

/** A 3D box: bottom-face-center location, (h, w, l) sizes, yaw about +y. */
export interface Box {
  location: [number, number, number];
  dimensions: [number, number, number];
  yaw: number;
}

/** One depth hypothesis with its predicted standard deviation. */
export interface DepthEstimate {
  z: number;
  sigma: number;
}

/** Inputs to the monocular box decoder, one object. */
export interface BoxObservation {
  /** Projected 3D-center pixel (u, v). */
  center2d: [number, number];
  /** Direct estimate plus the three keypoint-line estimates. */
  depthEstimates: DepthEstimate[];
  /** Log-residuals (dh, dw, dl) against the class mean dimensions. */
  dimDeltas: [number, number, number];
  /** Orientation bin logits, length numBins. */
  binLogits: number[];
  /** Per-bin (sin, cos) residuals, length numBins. */
  sincos: [number, number][];
  className: string;
}

export interface DecodeOptions {
  /** Override per-class mean dimensions, e.g. { Car: [1.5, 1.6, 3.9] }. */
  meanDims?: Record<string, [number, number, number]>;
  /** Orientation bin count (default 4). */
  numBins?: number;
}

/** Instance mask grid: labels[r][c] is 1 foreground, 0 background, -1 no point. */
export interface MaskGrid {
  size: number;
  labels: number[][];
}
