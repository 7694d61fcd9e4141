#!/usr/bin/env node
/**
 * plots <kind> --in FILE [FILE ...] --out PATH
 *
 * kinds:
 *   kprofiles    layer trajectory CSVs -> squeeze profiles vs the tent
 *   convergence  iteration history CSV -> log-distance decay plot
 *   fields       grid dump base paths (no extension) -> heatmaps; with
 *                several inputs, --out is treated as a prefix and one
 *                SVG per input is written as <out><field>_<i>.svg
 */

import { writeFileSync } from "fs";
import { plotConvergence, plotField, plotKProfiles } from "./plots.js";

export function run(argv: string[]): number {
  const [kind, ...rest] = argv;
  const inputs: string[] = [];
  let out = "";
  for (let i = 0; i < rest.length; i++) {
    if (rest[i] === "--in") {
      while (i + 1 < rest.length && !rest[i + 1].startsWith("--")) {
        inputs.push(rest[++i]);
      }
    } else if (rest[i] === "--out") {
      out = rest[++i] ?? "";
    } else {
      process.stderr.write(`unknown argument: ${rest[i]}\n`);
      return 2;
    }
  }
  if (!kind || !out || inputs.length === 0) {
    process.stderr.write("usage: plots <kind> --in FILES --out PATH\n");
    return 2;
  }
  try {
    if (kind === "kprofiles") {
      writeFileSync(out, plotKProfiles(inputs));
    } else if (kind === "convergence") {
      if (inputs.length !== 1) throw new Error("convergence takes one CSV");
      writeFileSync(out, plotConvergence(inputs[0]));
    } else if (kind === "fields") {
      if (inputs.length === 1) {
        writeFileSync(out, plotField(inputs[0]));
      } else {
        inputs.forEach((base, i) => {
          const name = base.split("/").pop();
          writeFileSync(`${out}${name}_${i}.svg`, plotField(base));
        });
      }
    } else {
      process.stderr.write(`unknown kind: ${kind}\n`);
      return 2;
    }
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n`);
    return 1;
  }
  return 0;
}

const isMain = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop() as string);
if (isMain) {
  process.exit(run(process.argv.slice(2)));
}
