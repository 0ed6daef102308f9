"""Command line entry point: train, recode, verify, eval, report.

Configuration is an INI document with sections mirroring the module
names ([run], [nn], [recoder], [bounds], [harness]); unknown sections or
keys are rejected.  CLI flags override file values.  Every command
writes a resolved-config echo (tool version, backend, derived seeds,
input checksums) next to its outputs, and all randomness derives from
one root seed through labeled substreams.

Exit codes: 0 success, 2 config error, 3 verification failure, 4 I/O
error.
"""

import argparse
import configparser
import json
import math
import os
import sys

import numpy as np

from necode import __version__, active_backend
from necode._io import atomic_write_text
from necode.bounds import (alignment, flatness, verify_degradation,
                           verify_retention)
from necode.firstlayer import extract
from necode.harness import (PreprocessOp, attack_projection_back,
                            cross_matrix, denoiser_training_pairs,
                            estimate_projection_basis,
                            random_projection_basis, read_rows, rows_to_csv,
                            sweep_strength, train_denoiser, write_report)
from necode.nn.datasets import make_dataset
from necode.nn.models import ModelSpec, accuracy
from necode.nn.serialize import load_model, save_model
from necode.nn.training import train
from necode.recoder import RecodingConfig, recode_batch, save_batch

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_IO = 0, 2, 3, 4

_SUBSTREAMS = {"train": 0, "recode": 1, "eval": 2, "attack": 3}


class ConfigError(Exception):
    """Invalid configuration document or flag values."""


class VerificationFailure(Exception):
    """A non-vacuous bound check failed, or recoding found no subspace."""


class IOFailure(Exception):
    """Missing or corrupt input artifacts."""


def substream_seed(root, label, *extra):
    """Deterministic child seed for one labeled randomness stream."""
    seq = np.random.SeedSequence([int(root), _SUBSTREAMS[label], *extra])
    return int(seq.generate_state(1)[0])


# ---------------------------------------------------------------------------
# configuration.

def _floats(text):
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _strings(text):
    return tuple(tok.strip() for tok in text.split(",") if tok.strip())


def _bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_MODEL_KEYS = {
    "hidden": int, "channels": int, "kernel": int, "embed_dim": int,
    "patch": int, "activation": str, "init_gain": float,
    "epochs": int, "lr": float, "batch_size": int,
}

_SCHEMA = {
    "run": {"seed": int, "out": str, "models_dir": str, "threads": int},
    "nn": {
        "dataset": str, "train": int, "eval": int, "probe": int,
        "n_classes": int, "n_features": int, "mean_scale": float,
        "noise": float, "families": _strings, "reseed": _strings,
    },
    "recoder": {
        "tau": float, "sigma": float, "lam": float,
        "target_psnr_db": float, "z_mode": str, "criterion": str,
        "split": str, "limit": int,
    },
    "bounds": {
        "tau": float, "sigma_grid": _floats, "t_grid": _floats,
        "trials": int, "samples": int, "top_k": int,
    },
    "harness": {
        "matrix": _bool, "psnr_grid": _floats, "sweep_targets": _strings,
        "preprocess": str, "attacks": _strings, "projection_rank": int,
        "denoiser_epochs": int, "denoiser_train_limit": int,
        "split": str, "limit": int,
    },
}

_DEFAULTS = {
    "run": {"seed": 0, "out": "runs/out", "models_dir": None,
            "threads": None},
    "nn": {
        "dataset": "mini-digits", "train": None, "eval": None,
        "probe": None, "n_classes": 2, "n_features": 64,
        "mean_scale": 3.0, "noise": 0.5,
        "families": ("dense-front", "conv-front", "attention-front"),
        "reseed": ("attention-front",),
    },
    "recoder": {
        "tau": 1e-4, "sigma": 1.0, "lam": 1.0, "target_psnr_db": 20.0,
        "z_mode": "gaussian", "criterion": "per-value", "split": "eval",
        "limit": None,
    },
    "bounds": {
        "tau": 1e-4, "sigma_grid": (0.1, 0.2, 1.0), "t_grid": (0.5, 1.0),
        "trials": 10000, "samples": 64, "top_k": 8,
    },
    "harness": {
        "matrix": True, "psnr_grid": (), "sweep_targets": (),
        "preprocess": "", "attacks": (), "projection_rank": 40,
        "denoiser_epochs": 60, "denoiser_train_limit": 512,
        "split": "eval", "limit": None,
    },
}

_MODEL_DEFAULTS = {"activation": "tanh", "epochs": 40, "lr": 0.05,
                   "batch_size": 32}

# per-family training recipes for the stock mini-digits zoo; a config
# file overrides any of these through [nn] <family>.<param> keys
_FAMILY_DEFAULTS = {
    "dense-front": {"hidden": 96, "epochs": 400, "lr": 0.01},
    "conv-front": {"kernel": 15, "channels": 1, "epochs": 350, "lr": 0.01,
                   "batch_size": 64},
    "attention-front": {"embed_dim": 4, "patch": 4, "epochs": 80,
                        "lr": 0.02},
}


def load_config(path=None):
    """Parse and validate an INI config; returns nested plain dicts."""
    cfg = {section: dict(values) for section, values in _DEFAULTS.items()}
    cfg["nn_models"] = {}
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if section == "nn" and "." in key:
                family, _, param = key.partition(".")
                if param not in _MODEL_KEYS:
                    raise ConfigError(
                        f"unknown model parameter {key!r} in [nn]")
                try:
                    value = _MODEL_KEYS[param](raw)
                except ValueError as exc:
                    raise ConfigError(f"[nn] {key} = {raw!r}: {exc}")
                cfg["nn_models"].setdefault(family, {})[param] = value
                continue
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            try:
                cfg[section][key] = _SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}")
    return cfg


def apply_flags(cfg, args):
    """CLI flags take precedence over config-file values."""
    if args.seed is not None:
        cfg["run"]["seed"] = args.seed
    if args.out is not None:
        cfg["run"]["out"] = args.out
    if getattr(args, "models_dir", None) is not None:
        cfg["run"]["models_dir"] = args.models_dir
    if args.tau is not None:
        cfg["recoder"]["tau"] = args.tau
        cfg["bounds"]["tau"] = args.tau
    if args.psnr is not None:
        cfg["recoder"]["target_psnr_db"] = args.psnr
    return cfg


def _resolve_threads(cfg):
    env = os.environ.get("NECODE_THREADS")
    candidates = [v for v in (cfg["run"]["threads"],
                              int(env) if env else None) if v is not None]
    threads = min(candidates) if candidates else None
    if threads is not None and threads < 1:
        raise ConfigError("thread cap must be >= 1")
    if threads is not None and active_backend() == "numba":
        import numba

        # a cap above the hardware pool clamps instead of erroring
        threads = min(threads, numba.config.NUMBA_NUM_THREADS)
        numba.set_num_threads(threads)
    return threads


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else repr(value)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_echo(cfg, command, inputs=None, threads=None):
    """Resolved-config echo next to the outputs; returns its path."""
    root = cfg["run"]["seed"]
    echo = {
        "command": command,
        "tool_version": __version__,
        "backend": active_backend(),
        "threads": threads,
        "root_seed": root,
        "substream_seeds": {label: substream_seed(root, label)
                            for label in _SUBSTREAMS},
        "config": _json_safe({k: v for k, v in cfg.items()}),
        "input_checksums": dict(inputs or {}),
    }
    path = os.path.join(cfg["run"]["out"], "resolved_config.json")
    atomic_write_text(path, json.dumps(echo, indent=2, sort_keys=True)
                      + "\n")
    return path


# ---------------------------------------------------------------------------
# shared builders.

def build_dataset(cfg):
    nn = cfg["nn"]
    sizes = {k: nn[k] for k in ("train", "eval", "probe")
             if nn[k] is not None} or None
    try:
        if nn["dataset"] == "gaussian-blobs":
            return make_dataset(
                "gaussian-blobs", seed=cfg["run"]["seed"], sizes=sizes,
                n_classes=nn["n_classes"], n_features=nn["n_features"],
                mean_scale=nn["mean_scale"], noise=nn["noise"])
        if nn["dataset"] == "mini-digits":
            return make_dataset("mini-digits", sizes=sizes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown dataset {nn['dataset']!r}")


def _model_spec(cfg, data, family):
    params = dict(_MODEL_DEFAULTS)
    params.update(_FAMILY_DEFAULTS.get(family, {}))
    params.update(cfg["nn_models"].get(family, {}))
    schedule = {k: params.pop(k) for k in ("epochs", "lr", "batch_size")}
    try:
        spec = ModelSpec(family, data.layout, data.n_classes, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model spec for {family}: {exc}") from exc
    return spec, schedule


def recoding_config(cfg, with_target=True):
    rec = cfg["recoder"]
    try:
        return RecodingConfig(
            tau=rec["tau"], sigma=rec["sigma"], lam=rec["lam"],
            seed=substream_seed(cfg["run"]["seed"], "recode"),
            target_psnr_db=rec["target_psnr_db"] if with_target else None,
            z_mode=rec["z_mode"], criterion=rec["criterion"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def models_dir(cfg):
    configured = cfg["run"]["models_dir"]
    return configured or os.path.join(cfg["run"]["out"], "models")


def load_manifest(cfg):
    """(ordered name -> model dict, manifest dict) from a train run."""
    directory = models_dir(cfg)
    path = os.path.join(directory, "manifest.json")
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise IOFailure(f"missing manifest {path}") from exc
    except json.JSONDecodeError as exc:
        raise IOFailure(f"corrupt manifest {path}: {exc}") from exc
    models = {}
    for entry in manifest["models"]:
        model_path = os.path.join(directory, entry["file"])
        try:
            models[entry["name"]] = load_model(model_path)
        except (FileNotFoundError, ValueError) as exc:
            raise IOFailure(f"cannot load {model_path}: {exc}") from exc
    return models, manifest


# ---------------------------------------------------------------------------
# commands.

def cmd_train(cfg):
    data = build_dataset(cfg)
    out_dir = models_dir(cfg)
    root = cfg["run"]["seed"]
    families = cfg["nn"]["families"]
    reseed = set(cfg["nn"]["reseed"])
    unknown = reseed - set(families)
    if unknown:
        raise ConfigError(f"reseed families not in grid: {sorted(unknown)}")
    entries, ta_pairs, written = [], [], []
    try:
        for fi, family in enumerate(families):
            replicas = 2 if family in reseed else 1
            names = []
            for replica in range(replicas):
                spec, schedule = _model_spec(cfg, data, family)
                seed = substream_seed(root, "train", fi, replica)
                name = family if replica == 0 else f"{family}-r{replica}"
                model = train(spec, data, seed=seed, name=name, **schedule)
                file_name = f"{name}.necm"
                path = os.path.join(out_dir, file_name)
                checksum = save_model(path, model)
                written.append(path)
                entries.append({
                    "name": name, "family": family, "seed": seed,
                    "file": file_name, "checksum": checksum,
                    "eval_accuracy": accuracy(model, data, split="eval"),
                })
                names.append(name)
            if len(names) == 2:
                ta_pairs.append(names)
    except Exception:
        for path in written:
            if os.path.exists(path):
                os.unlink(path)
        raise
    manifest = {
        "dataset": {"name": data.name, "fingerprint": data.fingerprint()},
        "models": entries,
        "ta_pairs": ta_pairs,
    }
    atomic_write_text(os.path.join(out_dir, "manifest.json"),
                      json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    write_echo(cfg, "train",
               inputs={"dataset": data.fingerprint()},
               threads=_resolve_threads(cfg))
    for entry in entries:
        print(f"trained {entry['name']}: eval accuracy "
              f"{entry['eval_accuracy']:.3f} checksum {entry['checksum']}")
    return EXIT_OK


def cmd_recode(cfg, model_name=None, split=None, limit=None):
    data = build_dataset(cfg)
    models, manifest = load_manifest(cfg)
    name = model_name or manifest["models"][0]["name"]
    if name not in models:
        raise ConfigError(f"unknown model {name!r}; manifest has "
                          f"{sorted(models)}")
    split = split or cfg["recoder"]["split"]
    limit = limit if limit is not None else cfg["recoder"]["limit"]
    config = recoding_config(cfg)
    try:
        batch = recode_batch(data, models[name], config, split=split,
                             limit=limit)
    except ValueError as exc:
        raise VerificationFailure(str(exc)) from exc
    out = os.path.join(cfg["run"]["out"], f"ne_{name}_{split}.neb")
    save_batch(batch, out)
    realized = np.array([p.realized_psnr_db for p in batch.perturbations])
    finite = realized[np.isfinite(realized)]
    mean = float(finite.mean()) if finite.size else math.inf
    write_echo(cfg, "recode",
               inputs={"dataset": data.fingerprint(),
                       "model": batch.model_fingerprint},
               threads=_resolve_threads(cfg))
    print(f"recoded {realized.size} samples from {name}/{split} -> {out}")
    print(f"realized psnr dB: mean {mean:.2f} min {realized.min():.2f} "
          f"max {realized.max():.2f} (lambda {batch.config.lam:.4g})")
    return EXIT_OK


def cmd_verify(cfg):
    data = build_dataset(cfg)
    models, manifest = load_manifest(cfg)
    bounds_cfg = cfg["bounds"]
    tau = bounds_cfg["tau"]
    failures = []
    report = {"retention": [], "degradation": [], "flatness": [],
              "alignment": []}
    operators = {name: extract(model) for name, model in models.items()}
    for name, op in operators.items():
        for sigma in bounds_cfg["sigma_grid"]:
            for t in bounds_cfg["t_grid"]:
                rec = verify_retention(
                    op, tau, sigma, t, trials=bounds_cfg["trials"],
                    seed=substream_seed(cfg["run"]["seed"], "eval"))
                entry = {"model": name, **rec.as_dict()}
                report["retention"].append(entry)
                if rec.passes is False:
                    failures.append(f"retention {name} sigma={sigma} t={t}")
    config = recoding_config(cfg)
    names = list(models)
    sample_cache = {}
    report["incomparable_pairs"] = []
    for a in names:
        for b in names:
            if a == b:
                continue
            if operators[a].W_eff.shape != operators[b].W_eff.shape:
                report["incomparable_pairs"].append([a, b])
                continue
            if a not in sample_cache:
                try:
                    batch = recode_batch(data, models[a], config,
                                         split=cfg["recoder"]["split"],
                                         limit=bounds_cfg["samples"])
                except ValueError as exc:
                    raise VerificationFailure(str(exc)) from exc
                flat = batch.recoded.reshape(batch.recoded.shape[0], -1)
                deltas = np.stack([p.delta.reshape(-1)
                                   for p in batch.perturbations])
                sample_cache[a] = (flat, deltas)
            x_tilde, deltas = sample_cache[a]
            rec = verify_degradation(operators[a], operators[b], tau,
                                     x_tilde, deltas=deltas)
            entry = {"target": a, "other": b, **rec.as_dict()}
            report["degradation"].append(entry)
            if rec.passes is False:
                failures.append(f"degradation {a} vs {b}")
    X_train, _ = data.split_arrays("train")
    report["flatness"].append(
        {"subject": "train-data", **flatness(X_train).as_dict()})
    for name, op in operators.items():
        report["flatness"].append(
            {"subject": name, **flatness(op).as_dict()})
        top_k = min(bounds_cfg["top_k"], min(op.W_eff.shape))
        rec = alignment(op, X_train, top_k=top_k)
        report["alignment"].append({"model": name, **rec.as_dict()})
    report["failures"] = failures
    out = os.path.join(cfg["run"]["out"], "bound_reports.json")
    atomic_write_text(out, json.dumps(_json_safe(report), indent=2,
                                      sort_keys=True) + "\n")
    write_echo(cfg, "verify",
               inputs={"dataset": data.fingerprint()},
               threads=_resolve_threads(cfg))
    vacuous = sum(1 for section in ("retention", "degradation")
                  for entry in report[section] if entry["vacuous"])
    print(f"bound checks: {len(report['retention'])} retention, "
          f"{len(report['degradation'])} degradation, "
          f"{vacuous} VACUOUS, {len(failures)} failures -> {out}")
    if failures:
        raise VerificationFailure("; ".join(failures))
    return EXIT_OK


def _parse_preprocess(text):
    ops = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        tokens = chunk.split()
        params = {}
        for token in tokens[1:]:
            key, _, raw = token.partition("=")
            if not _:
                raise ConfigError(f"bad preprocess parameter {token!r}")
            try:
                value = int(raw)
            except ValueError:
                try:
                    value = float(raw)
                except ValueError:
                    value = raw
            params[key] = value
        try:
            ops.append(PreprocessOp(tokens[0], params))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return ops


def _denoiser_transform(cfg, data, models, mode):
    """Attack hook: train a denoiser per target batch and apply it."""
    by_fingerprint = {}
    from necode.recoder import model_fingerprint

    for name, model in models.items():
        by_fingerprint[model_fingerprint(model)] = model
    limit = cfg["harness"]["denoiser_train_limit"]
    epochs = cfg["harness"]["denoiser_epochs"]
    attack_seed = substream_seed(cfg["run"]["seed"], "attack")
    base = recoding_config(cfg)

    def transform(X_eval, batch):
        target = by_fingerprint[batch.model_fingerprint]
        first = recode_batch(data, target, base, split="train", limit=limit)
        recodings = [first.recoded]
        if mode == "noise2noise":
            from dataclasses import replace

            second_cfg = replace(first.config,
                                 target_psnr_db=None,
                                 seed=first.config.seed + 1)
            recodings.append(recode_batch(data, target, second_cfg,
                                          split="train",
                                          limit=limit).recoded)
        pairs = denoiser_training_pairs(first.originals, recodings, mode)
        denoiser = train_denoiser(pairs[0], pairs[1], mode,
                                  seed=attack_seed, epochs=epochs)
        return denoiser.apply(X_eval)

    return transform


def cmd_eval(cfg):
    data = build_dataset(cfg)
    models, manifest = load_manifest(cfg)
    har = cfg["harness"]
    split, limit = har["split"], har["limit"]
    config = recoding_config(cfg)
    reports = []
    if har["matrix"] and models:
        reports.append(cross_matrix(models, data, config, split=split,
                                    limit=limit))
        for op in _parse_preprocess(har["preprocess"]):
            reports.append(cross_matrix(models, data, config, split=split,
                                        limit=limit, preprocess=op))
        for attack in har["attacks"]:
            if attack == "projection-back":
                X_probe, _ = data.split_arrays("probe")
                mean, basis = estimate_projection_basis(
                    X_probe, har["projection_rank"])
                hook = ("projection-back:public-pca",
                        lambda X, batch: attack_projection_back(
                            X, basis, mean=mean))
                reports.append(cross_matrix(models, data, config,
                                            split=split, limit=limit,
                                            attack=hook))
                rand = random_projection_basis(
                    basis.shape[0], har["projection_rank"],
                    seed=substream_seed(cfg["run"]["seed"], "attack"))
                hook = ("projection-back:random",
                        lambda X, batch: attack_projection_back(
                            X, rand, mean=mean))
                reports.append(cross_matrix(models, data, config,
                                            split=split, limit=limit,
                                            attack=hook))
            elif attack.startswith("denoiser:"):
                mode = attack.split(":", 1)[1]
                hook = (f"denoiser:{mode}",
                        _denoiser_transform(cfg, data, models, mode))
                reports.append(cross_matrix(models, data, config,
                                            split=split, limit=limit,
                                            attack=hook))
            else:
                raise ConfigError(f"unknown attack {attack!r}")
    targets = har["sweep_targets"]
    if har["psnr_grid"] and not targets:
        targets = tuple(models)
    for target in targets:
        if target not in models:
            raise ConfigError(f"sweep target {target!r} not in manifest")
        reports.append(sweep_strength(target, models, har["psnr_grid"],
                                      data, config, split=split,
                                      limit=limit))
    out_csv = os.path.join(cfg["run"]["out"], "eval_grid.csv")
    out_summary = os.path.join(cfg["run"]["out"], "eval_summary.json")
    text = write_report(reports, out_csv, summary_path=out_summary)
    write_echo(cfg, "eval",
               inputs={"dataset": data.fingerprint(),
                       "models": {e["name"]: e["checksum"]
                                  for e in manifest["models"]}},
               threads=_resolve_threads(cfg))
    print(f"wrote {text.count(chr(10)) - 1} grid rows -> {out_csv}")
    return EXIT_OK


def cmd_report(cfg, sources):
    rows, checksums = [], {}
    import hashlib

    for source in sources:
        try:
            rows.extend(read_rows(source))
            with open(source, "rb") as fh:
                digest = hashlib.blake2b(fh.read(), digest_size=8)
            checksums[source] = digest.hexdigest()
        except FileNotFoundError as exc:
            raise IOFailure(str(exc)) from exc
        except ValueError as exc:
            raise IOFailure(f"{source}: {exc}") from exc
    rows.sort(key=lambda r: r.key())
    out_csv = os.path.join(cfg["run"]["out"], "report.csv")
    text = rows_to_csv(rows)
    atomic_write_text(out_csv, text)
    summary = {
        "columns": text.splitlines()[0].split(","),
        "rows": len(rows),
        "sources": checksums,
    }
    atomic_write_text(os.path.join(cfg["run"]["out"], "report_summary.json"),
                      json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_echo(cfg, "report", inputs=checksums,
               threads=_resolve_threads(cfg))
    print(f"merged {len(rows)} rows from {len(sources)} files -> {out_csv}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing and dispatch.

def build_parser():
    parser = argparse.ArgumentParser(
        prog="necode",
        description="desk-scale non-transferable recoding toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config path")
        p.add_argument("--seed", type=int, help="root seed override")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--tau", type=float,
                       help="insensitivity threshold override")
        p.add_argument("--psnr", type=float,
                       help="target PSNR (dB) override")
        p.add_argument("--models-dir", dest="models_dir",
                       help="directory holding trained model containers")

    common(sub.add_parser("train", help="train the configured model grid"))
    recode = sub.add_parser("recode", help="recode one split for a model")
    common(recode)
    recode.add_argument("--model", help="model name from the manifest")
    recode.add_argument("--split", choices=("train", "eval", "probe"))
    recode.add_argument("--limit", type=int)
    common(sub.add_parser("verify", help="run the bound verifications"))
    common(sub.add_parser("eval", help="run the evaluation protocol"))
    report = sub.add_parser("report", help="merge evaluation CSVs")
    common(report)
    report.add_argument("sources", nargs="+", help="input CSV paths")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        try:
            cfg = apply_flags(load_config(args.config), args)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {exc.filename}")
        os.makedirs(cfg["run"]["out"], exist_ok=True)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "recode":
            return cmd_recode(cfg, model_name=args.model, split=args.split,
                              limit=args.limit)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "eval":
            return cmd_eval(cfg)
        return cmd_report(cfg, args.sources)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerificationFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except IOFailure as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, RuntimeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
