import { existsSync, readFileSync } from 'node:fs';
import { mkdtemp, rm } from 'node:fs/promises';
import { tmpdir } from 'node:os';
import path from 'node:path';

import { runCli, runOp } from './runner.js';
import type {
  BoundReport,
  Box,
  BoxObservation,
  Calibration,
  DecodeOptions,
  EvaluateOptions,
  MaskGrid,
} from './types.js';

export * from './types.js';
export { cliCommand } from './runner.js';

function iouFlags(flag: string, value: number | Record<string, number> | undefined): string[] {
  if (value === undefined) return [];
  if (typeof value === 'number') return [flag, String(value)];
  return Object.entries(value).flatMap(([cls, t]) => [flag, `${cls}=${t}`]);
}

/**
 * Score predictions against ground truth; both arguments are directories of
 * KITTI label files. Returns the parsed machine report, identical to what
 * `mono3d evaluate --out` writes as report.json. Pass options.outDir to also
 * keep the report files on disk.
 */
export async function evaluate(
  gtDir: string,
  predDir: string,
  options: EvaluateOptions = {},
): Promise<BoundReport> {
  if (!existsSync(gtDir)) throw new Error(`ground-truth directory does not exist: ${gtDir}`);
  if (!existsSync(predDir)) throw new Error(`prediction directory does not exist: ${predDir}`);

  const scratch = options.outDir ?? (await mkdtemp(path.join(tmpdir(), 'mono3d-')));
  try {
    const args = ['evaluate', '--gt-dir', gtDir, '--pred-dir', predDir, '--out', scratch];
    if (options.classes) args.push('--classes', options.classes.join(','));
    if (options.difficulties) args.push('--difficulties', options.difficulties.join(','));
    if (options.recallPoints !== undefined) args.push('--recall-points', String(options.recallPoints));
    args.push(...iouFlags('--iou-2d', options.iou2d));
    args.push(...iouFlags('--iou-bev', options.iouBev));
    args.push(...iouFlags('--iou-3d', options.iou3d));
    if (options.noOcclusion) args.push('--no-occlusion');
    if (options.jobs !== undefined) args.push('--jobs', String(options.jobs));
    await runCli(args);
    return JSON.parse(readFileSync(path.join(scratch, 'report.json'), 'utf8')) as BoundReport;
  } finally {
    if (!options.outDir) await rm(scratch, { recursive: true, force: true });
  }
}

/**
 * Depth similarity from raw match data, detections in descending score
 * order: deltas[i] is detection i's depth error (ignored unless tpFlags[i]),
 * detCountsPerRecall[k] is the number of counted detections at the k-th
 * recall cutoff. Exact pass-through to the library computation.
 */
export async function adsFromMatches(
  deltas: number[],
  tpFlags: boolean[],
  detCountsPerRecall: number[],
): Promise<number> {
  const out = await runOp<{ value: number }>('ads_from_matches', {
    deltas,
    tp_flags: tpFlags,
    det_counts_per_recall: detCountsPerRecall,
  });
  return out.value;
}

/**
 * LiDAR instance-mask labels for one target box: projects the cloud
 * (rectified-frame points, [x, y, z][]) into the roi (left, top, right,
 * bottom), rasterizes onto an s x s grid, and labels each occupied cell from
 * one seeded-random point. Deterministic for a fixed seed.
 */
export async function generateMask(
  box: Box,
  cloud: number[][],
  roi: [number, number, number, number],
  s: number,
  calib: Calibration,
  seed: number,
): Promise<MaskGrid> {
  return runOp<MaskGrid>('generate_mask', { box, cloud, roi, s, calib, seed });
}

/** Decode one detector-head observation into a 3D box. */
export async function decodeBox(
  obs: BoxObservation,
  calib: Calibration,
  options: DecodeOptions = {},
): Promise<Box> {
  const out = await runOp<{ location: number[]; dimensions: number[]; yaw: number }>(
    'decode_box',
    {
      center2d: obs.center2d,
      depth_estimates: obs.depthEstimates.map((d) => [d.z, d.sigma]),
      dim_deltas: obs.dimDeltas,
      bin_logits: obs.binLogits,
      sincos: obs.sincos,
      class_name: obs.className,
      calib,
      mean_dims: options.meanDims ?? {},
      num_bins: options.numBins ?? 4,
    },
  );
  return {
    location: out.location as [number, number, number],
    dimensions: out.dimensions as [number, number, number],
    yaw: out.yaw,
  };
}

// The library documents these operations under their snake_case names.
export const ads_from_matches = adsFromMatches;
export const generate_mask = generateMask;
export const decode_box = decodeBox;
