"""Command-line interface: ``snnvad <command> ...``.

Exit codes: 0 ok, 1 validation error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from .audio import extract_features, fit_normalizer, read_wav, write_features
from .dataset import build_dataset, encode_utterance, load_corpus
from .encoding import CONTEXT_FRAMES
from .energy import estimate_power, get_preset, spike_stats, write_energy_csv, PRESETS
from .errors import DataError, SnnVadError, ValidationError
from .metrics import default_rho_grid, evaluate, roc_sweep, write_roc_csv
from .network import forward, make_architecture, readout_max
from .pruning import TicketSchedule, lottery_loop
from .synth import generate_corpus
from .config import load_config
from .training import LOSS_CONFIGS, accuracy, train

log = logging.getLogger("snnvad")


def _context(model):
    return CONTEXT_FRAMES if model.readout_window is not None else 1


def _steps_per_frame(model):
    return model.T_total // _context(model)


def utterance_scores(model, utt, normalizer, batch_size=256):
    """Decision scores for every frame of one utterance (test-time clipping on)."""
    rasters = encode_utterance(utt, normalizer, _steps_per_frame(model), _context(model), clip=True)
    scores = []
    for start in range(0, len(rasters), batch_size):
        trace = forward(model, rasters[start:start + batch_size], record_current=False)
        m, _ = readout_max(trace, model.readout_window)
        scores.append(m[:, 1] - m[:, 0])
    return np.concatenate(scores)


def _load_ckpt_for_eval(path):
    ck = ckpt_io.load(path)
    if ck.normalizer is None:
        raise DataError(f"{path}: checkpoint has no feature normalizer")
    return ck


# --- commands ------------------------------------------------------------------


def cmd_features(args):
    wav_dir, out = Path(args.wav_dir), Path(args.out_dir)
    if not wav_dir.is_dir():
        raise DataError(f"{wav_dir} is not a directory")
    wavs = sorted(wav_dir.glob("*.wav"))
    if not wavs:
        log.warning("no .wav files found in %s; nothing to do", wav_dir)
        return 0
    out.mkdir(parents=True, exist_ok=True)
    failed = 0
    for wav in wavs:
        try:
            feats = extract_features(read_wav(wav))
        except DataError as exc:
            log.error("%s", exc)
            failed += 1
            continue
        write_features(out / f"{wav.stem}.svfe", feats)
        labels = wav.with_suffix(".csv")
        if labels.exists() and labels.resolve() != (out / labels.name).resolve():
            shutil.copyfile(labels, out / labels.name)
        log.info("%s: %d frames", wav.name, feats.shape[0])
    if failed:
        log.error("%d of %d files failed", failed, len(wavs))
        return DataError.exit_code
    return 0


def cmd_synth(args):
    stems = generate_corpus(args.out_dir, args.snr, duration=args.duration, files_per_snr=args.files,
                            speech_fraction=args.speech_fraction, seed=args.seed)
    log.info("wrote %d clips to %s", len(stems), args.out_dir)
    return 0


def _train_config(args):
    cfg = load_config(args.config, data=args.data, labels=args.labels, out=args.out,
                      history=args.history, arch=args.arch, loss=args.loss, epochs=args.epochs,
                      seed=args.seed, T=args.T, batch_size=args.batch_size, lr=args.lr,
                      max_steps=args.max_steps)
    if not cfg.data:
        raise ValidationError("no training data given (--data or 'data' in the config)")
    if not cfg.out:
        raise ValidationError("no checkpoint path given (--out or 'out' in the config)")
    return cfg


def cmd_train(args):
    cfg = _train_config(args)
    utts = load_corpus(cfg.data, cfg.labels)
    normalizer = fit_normalizer([u.features for u in utts])
    model = make_architecture(cfg.arch, seed=cfg.seed, steps_per_frame=cfg.T)
    rasters, labels = build_dataset(utts, normalizer, cfg.T, _context(model), clip=False)
    init = [w.copy() for w in model.weights()]
    meta = {"loss": cfg.loss, "epochs": cfg.epochs, "lr": cfg.lr, "batch_size": cfg.batch_size}
    # the initialization must be on disk before the first update for later rewinding
    ckpt_io.save(ckpt_io.Checkpoint(model, init, normalizer, cfg.seed, meta), cfg.out)
    trained, history = train(model, rasters, labels, cfg.epochs, cfg.batch_size, LOSS_CONFIGS[cfg.loss],
                             seed=cfg.seed, learning_rate=cfg.lr, max_steps=cfg.max_steps)
    ckpt_io.save(ckpt_io.Checkpoint(trained, init, normalizer, cfg.seed, meta), cfg.out)
    if cfg.history:
        history.write_csv(cfg.history)
    if history.epochs:
        last = history.epochs[-1]
        log.info("trained %d epochs (%d steps): loss %.4f, accuracy %.4f", len(history.epochs),
                 history.steps, last.mean_loss, last.accuracy)
    return 0


def cmd_prune(args):
    ck = ckpt_io.load(args.checkpoint)
    if ck.init_weights is None:
        raise ValidationError(f"{args.checkpoint}: no initialization weights stored; cannot rewind")
    schedule = TicketSchedule(tuple(args.schedule))
    if len(schedule) == 0:
        log.warning("empty pruning schedule; nothing to do")
        return 0
    if ck.normalizer is None:
        raise DataError(f"{args.checkpoint}: checkpoint has no feature normalizer")
    meta = dict(ck.meta)
    epochs = args.epochs if args.epochs is not None else int(meta.get("epochs", 10))
    lr = args.lr if args.lr is not None else float(meta.get("lr", 1e-4))
    batch = int(meta.get("batch_size", 256))
    loss_cfg = LOSS_CONFIGS[meta.get("loss", "balanced")]
    utts = load_corpus(args.data, args.labels)
    model = ck.model
    rasters, labels = build_dataset(utts, ck.normalizer, _steps_per_frame(model), _context(model),
                                    clip=True)

    init_model = model.copy()
    for layer, w in zip(init_model.layers, ck.init_weights):
        layer.weights = w.copy()
        layer.mask = None

    def train_fn(m):
        trained, hist = train(m, rasters, labels, epochs, batch, loss_cfg, seed=ck.seed, learning_rate=lr)
        return trained, {"accuracy": accuracy(trained, rasters, labels)}

    dense = (model, {"accuracy": accuracy(model, rasters, labels)})
    rounds = lottery_loop(init_model, schedule, train_fn, dense=dense)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.checkpoint).stem
    for frac, rnd in zip(schedule.keep_fractions, rounds[1:]):
        path = out / f"{stem}_keep{int(round(frac * 100)):03d}.svck"
        meta_i = dict(meta, keep_fraction=frac, epochs=epochs, lr=lr)
        ckpt_io.save(ckpt_io.Checkpoint(rnd.model, ck.init_weights, ck.normalizer, ck.seed, meta_i), path)
        log.info("%s: density %.4f, training accuracy %.4f", path.name, rnd.mask.density,
                 rnd.metrics["accuracy"])
    return 0


def _scores_and_truth(ck, data, labels_dir):
    utts = load_corpus(data, labels_dir)
    scores = [utterance_scores(ck.model, u, ck.normalizer) for u in utts]
    return scores, [u.labels for u in utts]


def cmd_eval(args):
    ck = _load_ckpt_for_eval(args.checkpoint)
    scores, truth = _scores_and_truth(ck, args.data, args.labels)
    smooth = None if args.no_smooth else args.smooth
    report = evaluate(scores, truth, args.rho, smooth)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "report.csv")
    if args.sweep:
        write_roc_csv(out / "roc.csv", roc_sweep(scores, truth, default_rho_grid(scores, args.points), smooth))
    print(f"FAR {report.far:.4f}  MR {report.mr:.4f}  DCF {report.dcf:.4f}  HTER {report.hter:.4f}")
    return 0


def cmd_roc(args):
    ck = _load_ckpt_for_eval(args.checkpoint)
    scores, truth = _scores_and_truth(ck, args.data, args.labels)
    smooth = None if args.no_smooth else args.smooth
    write_roc_csv(args.out, roc_sweep(scores, truth, default_rho_grid(scores, args.points), smooth))
    return 0


def cmd_energy(args):
    ref = get_preset(args.preset)
    ck = _load_ckpt_for_eval(args.checkpoint)
    utts = load_corpus(args.data, require_labels=False)
    model = ck.model
    rasters = np.concatenate([
        encode_utterance(u, ck.normalizer, _steps_per_frame(model), _context(model)) for u in utts
    ])
    if args.max_frames:
        rasters = rasters[:args.max_frames]
    stats = spike_stats(forward(model, rasters, record_current=False), model)
    power = estimate_power(stats, ref, model.n_neurons)
    if args.out:
        write_energy_csv(args.out, stats, power, ref)
    rates = " ".join(f"{r:.3f}" for r in stats.rates)
    print(f"rates per layer: {rates}")
    print(f"SOPs per inference: {stats.total_sops:.1f}")
    print(f"estimated power: {power * 1e6:.2f} uW ({ref.name}, {model.n_neurons} neurons)")
    return 0


def cmd_inspect(args):
    ck = ckpt_io.load(args.checkpoint)
    m = ck.model
    print(f"architecture: {m.name}  sizes {m.sizes}  T_total {m.T_total}  readout window {m.readout_window}")
    print(f"weights: {m.n_weights}  neurons: {m.n_neurons}  seed: {ck.seed}")
    for i, layer in enumerate(m.layers):
        density = 1.0 if layer.mask is None else float(layer.mask.mean())
        print(f"  layer {i}: {layer.n_pre}x{layer.n_post} tau_mem {layer.tau_mem:g} tau_syn {layer.tau_syn:g}"
              f" density {density:.4f}{' (readout)' if layer.is_readout else ''}")
    print(f"init vector stored: {ck.init_weights is not None}")
    if ck.normalizer is not None:
        print(f"normalizer: min {ck.normalizer.min_value:.6g} max {ck.normalizer.max_value:.6g}")
    if ck.meta:
        print(f"meta: {ck.meta}")
    return 0


# --- parser -----------------------------------------------------------------------


def _fractions(text):
    text = text.strip()
    if not text:
        return []
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated fractions, got {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="snnvad", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("features", help="extract log-Mel feature files from WAVs")
    s.add_argument("wav_dir")
    s.add_argument("out_dir")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("synth", help="generate a synthetic labelled WAV corpus")
    s.add_argument("out_dir")
    s.add_argument("--snr", type=float, action="append", help="SNR in dB (repeatable)")
    s.add_argument("--duration", type=float, default=10.0, help="seconds per clip")
    s.add_argument("--files", type=int, default=1, help="clips per SNR level")
    s.add_argument("--speech-fraction", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train an SNN VAD model")
    s.add_argument("--config")
    s.add_argument("--data")
    s.add_argument("--labels")
    s.add_argument("--out")
    s.add_argument("--history")
    s.add_argument("--arch", choices=["h1", "h2"])
    s.add_argument("--loss", choices=sorted(LOSS_CONFIGS))
    s.add_argument("--epochs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--T", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--max-steps", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("prune", help="lottery-ticket pruning with rewinding")
    s.add_argument("checkpoint")
    s.add_argument("--data", required=True)
    s.add_argument("--labels")
    s.add_argument("--schedule", type=_fractions, default=[0.70, 0.40, 0.20, 0.15])
    s.add_argument("--epochs", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_prune)

    for name, func, hlp in (("eval", cmd_eval, "DCF/HTER report"), ("roc", cmd_roc, "ROC curve CSV")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("checkpoint")
        s.add_argument("--data", required=True)
        s.add_argument("--labels")
        s.add_argument("--smooth", type=int, default=11)
        s.add_argument("--no-smooth", action="store_true")
        s.add_argument("--points", type=int, default=101, help="thresholds in the ROC sweep")
        if name == "eval":
            s.add_argument("--rho", type=float, default=0.0)
            s.add_argument("--sweep", action="store_true", help="also write roc.csv")
            s.add_argument("--out-dir", required=True)
        else:
            s.add_argument("--out", required=True)
        s.set_defaults(func=func)

    s = sub.add_parser("energy", help="spike statistics and power estimate")
    s.add_argument("checkpoint")
    s.add_argument("--data", required=True)
    s.add_argument("--preset", default="truenorth-dense", help=f"one of {sorted(PRESETS)}")
    s.add_argument("--max-frames", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_energy)

    s = sub.add_parser("inspect", help="summarize a checkpoint")
    s.add_argument("checkpoint")
    s.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    if args.command == "synth" and not args.snr:
        args.snr = [0.0]
    try:
        return args.func(args)
    except SnnVadError as exc:
        log.error("%s", exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
