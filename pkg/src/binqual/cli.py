"""Command-line interface.

Subcommands::

    binqual quality REF.wav TEST.wav [--audiogram F] [--out CSV]
    binqual loudness IN.wav | --tone F,DUR,SPL [--audiogram F] [--out CSV]
                     [--specific-out CSV]
    binqual experiment {loudness-function|elc|slsum} [--audiogram F]
                     [--out CSV] [--plot FIG.svg] [--seed N] [--monaural]
    binqual distort IN.wav OUT.wav --kind KIND --param VALUE [--seed N]

Exit codes: 0 on success, 1 on processing errors, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import distortions, experiments, loudness, plotting, quality
from .periphery import Audiogram, AudiogramError
from .signals import SignalError, load_wav, save_wav, synth_tone


def _load_audiogram(path: str | None) -> Audiogram:
    if path is None:
        return Audiogram.normal_hearing()
    if not Path(path).exists():
        print(f"audiogram file {path} not found; assuming normal hearing",
              file=sys.stderr)
        return Audiogram.normal_hearing()
    return Audiogram.from_file(path)


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)


def _cmd_quality(args) -> int:
    audiogram = _load_audiogram(args.audiogram)
    ref = load_wav(args.reference)
    test = load_wav(args.test)
    report = quality.predict_quality(ref, test, audiogram)
    print(f"overall={report.overall:.6f}")
    print(f"q_mon={report.q_mon:.6f}")
    print(f"q_bin={report.q_bin:.6f}")
    if args.out:
        _write_text(args.out, report.to_csv())
    return 0


def _parse_tone(spec: str):
    parts = spec.split(",")
    if len(parts) != 3:
        raise SignalError("--tone expects FREQ,DUR,SPL (e.g. 1000,0.5,40)")
    return tuple(float(p) for p in parts)


def _cmd_loudness(args) -> int:
    audiogram = _load_audiogram(args.audiogram)
    if args.tone:
        freq, dur, spl = _parse_tone(args.tone)
        sig = synth_tone(freq, dur, spl)
    else:
        sig = load_wav(args.input)
    result = loudness.loudness_sones(sig, audiogram)
    print(f"sones={result.sones:.6f}")
    if args.out:
        _write_text(args.out, result.to_csv())
    if args.specific_out:
        peak = result.peak_index
        lines = ["cf_hz,specific_left,specific_right,specific_binaural"]
        for k, cf in enumerate(result.center_freqs):
            lines.append(f"{cf:.2f},{result.specific_left[k, peak]:.6g},"
                         f"{result.specific_right[k, peak]:.6g},"
                         f"{result.specific_binaural[k, peak]:.6g}")
        _write_text(args.specific_out, "\n".join(lines) + "\n")
    return 0


def _cmd_experiment(args) -> int:
    audiogram = _load_audiogram(args.audiogram)
    if args.name == "loudness-function":
        rows = experiments.run_loudness_function(audiogram, monaural=args.monaural)
        text = experiments.loudness_function_csv(rows)
        plot = plotting.plot_loudness_function
    elif args.name == "elc":
        rows = experiments.run_elc(audiogram, monaural=args.monaural)
        text = experiments.elc_csv(rows)
        plot = plotting.plot_elc
    else:
        rows = experiments.run_slsum(audiogram, seed=args.seed, monaural=args.monaural)
        text = experiments.slsum_csv(rows)
        plot = plotting.plot_slsum
    _write_text(args.out, text)
    if args.plot:
        plot(rows, args.plot)
    return 0


def _cmd_distort(args) -> int:
    sig = load_wav(args.input)
    out = distortions.distort(sig, args.kind, args.param, seed=args.seed)
    save_wav(out, args.output, encoding=args.encoding)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="binqual",
        description="Binaural audio quality and loudness prediction")
    sub = parser.add_subparsers(dest="command", required=True)

    p_quality = sub.add_parser("quality", help="compare a test signal to a reference")
    p_quality.add_argument("reference", help="reference WAV file")
    p_quality.add_argument("test", help="test WAV file (time-aligned, same length)")
    p_quality.add_argument("--audiogram", help="audiogram JSON file")
    p_quality.add_argument("--out", help="write the report CSV here")
    p_quality.set_defaults(func=_cmd_quality)

    p_loud = sub.add_parser("loudness", help="binaural loudness in sones")
    p_loud.add_argument("input", nargs="?", help="input WAV file")
    p_loud.add_argument("--tone", help="synthesize a tone: FREQ,DUR,SPL")
    p_loud.add_argument("--audiogram", help="audiogram JSON file")
    p_loud.add_argument("--out", help="write sones/internal/peak CSV here")
    p_loud.add_argument("--specific-out", help="write per-channel specific loudness here")
    p_loud.set_defaults(func=_cmd_loudness)

    p_exp = sub.add_parser("experiment", help="run a loudness experiment")
    p_exp.add_argument("name", choices=["loudness-function", "elc", "slsum"])
    p_exp.add_argument("--audiogram", help="audiogram JSON file")
    p_exp.add_argument("--out", help="write the CSV here (default: stdout)")
    p_exp.add_argument("--plot", help="render a figure to this path (e.g. out.svg)")
    p_exp.add_argument("--seed", type=int, default=0, help="noise seed (default 0)")
    p_exp.add_argument("--monaural", action="store_true",
                       help="present stimuli to the left ear only")
    p_exp.set_defaults(func=_cmd_experiment)

    p_dist = sub.add_parser("distort", help="apply a synthetic distortion")
    p_dist.add_argument("input", help="input WAV file")
    p_dist.add_argument("output", help="output WAV file")
    p_dist.add_argument("--kind", required=True, choices=distortions.DISTORTION_KINDS)
    p_dist.add_argument("--param", required=True, type=float,
                        help="dB/oct for tilt, SNR dB for additive_noise, "
                             "dB for ild_shift, mix in [0,1] for decorrelate")
    p_dist.add_argument("--seed", type=int, default=0, help="noise seed (default 0)")
    p_dist.add_argument("--encoding", default="float32",
                        choices=["float32", "pcm16", "pcm24"])
    p_dist.set_defaults(func=_cmd_distort)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if args.command == "loudness" and bool(args.input) == bool(args.tone):
        print("loudness: provide exactly one of IN.wav or --tone", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (SignalError, AudiogramError, loudness.MatchError, OSError) as exc:
        print(f"binqual: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
