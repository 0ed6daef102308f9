/** Command line entry: render --csv PATH --kind KIND --out PATH. */

import { realpathSync } from "node:fs";
import { fileURLToPath } from "node:url";

import yargs from "yargs";

import { PLOT_KINDS, PlotKind, render } from "./render.js";
import { SchemaError } from "./schema.js";

export async function main(argv: string[]): Promise<number> {
  let exitCode = 0;
  const parser = yargs(argv)
    .scriptName("necode-plots")
    .command(
      "render",
      "render an evaluation-grid CSV to an SVG figure",
      (cmd) =>
        cmd
          .option("csv", { type: "string", demandOption: true, describe: "input CSV path" })
          .option("kind", {
            type: "string",
            demandOption: true,
            choices: PLOT_KINDS,
            describe: "figure kind",
          })
          .option("out", { type: "string", demandOption: true, describe: "output SVG path" })
          .option("title", { type: "string", describe: "figure title" })
          .option("width", { type: "number", describe: "figure width in px" })
          .option("height", { type: "number", describe: "figure height in px" })
          .option("psnr", { type: "number", describe: "operating strength slice in dB" })
          .option("preprocess", { type: "string", describe: "preprocess label filter" })
          .option("attack", { type: "string", describe: "attack label filter" }),
      (args) => {
        const result = render({
          csv: args.csv,
          kind: args.kind as PlotKind,
          out: args.out,
          style: {
            ...(args.title === undefined ? {} : { title: args.title }),
            ...(args.width === undefined ? {} : { width: args.width }),
            ...(args.height === undefined ? {} : { height: args.height }),
            ...(args.psnr === undefined ? {} : { psnrDb: args.psnr }),
            ...(args.preprocess === undefined ? {} : { preprocess: args.preprocess }),
            ...(args.attack === undefined ? {} : { attack: args.attack }),
          },
        });
        for (const note of result.warnings) {
          process.stderr.write(`warning: ${note}\n`);
        }
        process.stdout.write(`wrote ${args.out}\n`);
      },
    )
    .demandCommand(1, "specify a command (render)")
    .strict()
    .exitProcess(false)
    .fail((message, error) => {
      const reason = error instanceof SchemaError ? `schema: ${error.message}` : (error?.message ?? message);
      process.stderr.write(`error: ${reason}\n`);
      exitCode = error instanceof SchemaError ? 3 : 2;
    });
  try {
    await parser.parseAsync();
  } catch (error) {
    if (exitCode === 0) {
      process.stderr.write(`error: ${error instanceof Error ? error.message : String(error)}\n`);
      exitCode = error instanceof SchemaError ? 3 : 2;
    }
  }
  return exitCode;
}

const invokedDirectly = (() => {
  const entry = process.argv[1];
  if (entry === undefined) return false;
  try {
    return realpathSync(entry) === fileURLToPath(import.meta.url);
  } catch {
    return false;
  }
})();

if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
