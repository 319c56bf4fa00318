import { execFile } from 'node:child_process';
import { fileURLToPath } from 'node:url';
import path from 'node:path';

const MAX_BUFFER = 64 * 1024 * 1024;

/**
 * Command that reaches the mono3d CLI. MONO3D_BIN overrides (whitespace
 * separated, e.g. "mono3d" or "/opt/py/bin/python3 -m mono3d"); the default
 * goes through the interpreter so a plain editable install is enough.
 */
export function cliCommand(): string[] {
  const env = process.env.MONO3D_BIN;
  if (env && env.trim() !== '') return env.trim().split(/\s+/);
  return [pythonBin(), '-m', 'mono3d'];
}

function pythonBin(): string {
  return process.env.MONO3D_PYTHON ?? 'python3';
}

function driverPath(): string {
  // src/ and dist/ are siblings of python/, so one hop up works for both.
  return path.join(path.dirname(fileURLToPath(import.meta.url)), '..', 'python', 'driver.py');
}

export interface RunResult {
  stdout: string;
  stderr: string;
}

function run(cmd: string[], stdin?: string): Promise<RunResult> {
  return new Promise((resolve, reject) => {
    const child = execFile(
      cmd[0],
      cmd.slice(1),
      { maxBuffer: MAX_BUFFER },
      (error, stdout, stderr) => {
        if (error) {
          const detail = stderr.trim() || error.message;
          reject(new Error(`${cmd.join(' ')} failed: ${detail}`));
        } else {
          resolve({ stdout, stderr });
        }
      },
    );
    if (stdin !== undefined) {
      child.stdin?.write(stdin);
    }
    child.stdin?.end();
  });
}

/** Run a mono3d CLI subcommand; rejects with the CLI's stderr diagnostics. */
export function runCli(args: string[]): Promise<RunResult> {
  return run([...cliCommand(), ...args]);
}

/**
 * Call one library operation through the bundled pass-through driver.
 * The payload and result cross as JSON, which round-trips every float64
 * exactly, so values returned here match the library to the last ulp.
 */
export async function runOp<T>(op: string, args: unknown): Promise<T> {
  const { stdout } = await run([pythonBin(), driverPath()], JSON.stringify({ op, args }));
  return JSON.parse(stdout) as T;
}
