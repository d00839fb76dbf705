"""Command line interface.

Exit codes: 0 success, 1 validation or usage error, 2 I/O error. Reports
go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io
from .errors import DataIOError, ValidationError
from .filterbank import frequency_response
from .gaussian import add_spectral_line, eeg_like_psd, synth_record
from .pipeline import (
    PipelineConfig,
    fit_apply_target,
    fit_reference,
    load_source_model,
    save_source_model,
)
from .spectral import WINDOWS, WelchConfig, l1_normalize, subject_psd
from .transport import BARYCENTERS, SCHEMES, hellinger, hellinger_to_sources, match_subject, w2_spectral

log = logging.getLogger("cmmn")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _add_welch(p, defaults: bool = True):
    d = WelchConfig()
    g = p.add_argument_group("Welch estimator")
    g.add_argument("--nperseg", type=int, default=d.nperseg if defaults else None)
    g.add_argument("--noverlap", type=int, default=None, help="default: nperseg // 2")
    g.add_argument("--nfft", type=int, default=None, help="default: nperseg")
    g.add_argument("--window", choices=WINDOWS, default=d.window if defaults else None)
    g.add_argument("--no-detrend", dest="detrend", action="store_false", default=None)


def _welch(args, base: WelchConfig | None = None) -> WelchConfig:
    if base is not None and args.nperseg is None and args.noverlap is None and args.nfft is None:
        window = args.window or base.window
        detrend = base.detrend if args.detrend is None else args.detrend
        return WelchConfig(base.nperseg, base.noverlap, base.nfft, window, detrend)
    return WelchConfig(
        nperseg=args.nperseg if args.nperseg is not None else WelchConfig().nperseg,
        noverlap=args.noverlap,
        nfft=args.nfft,
        window=args.window or "hann",
        detrend=True if args.detrend is None else args.detrend,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cmmn", description="Spectral normalization of multichannel recordings.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("psd", help="channel-averaged PSD per subject of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="directory for <subject_id>.csv tables")
    _add_welch(p)

    p = sub.add_parser("barycenter", help="reference spectrum from PSD tables")
    p.add_argument("--psd", nargs="+", required=True)
    p.add_argument("--scheme", choices=tuple(BARYCENTERS), default="barycenter")
    p.add_argument("--out", help="output PSD table (default: stdout)")

    p = sub.add_parser("match", help="nearest source PSD to a target in Hellinger distance")
    p.add_argument("--target", required=True)
    p.add_argument("--sources", nargs="+", required=True)

    p = sub.add_parser("fit", help="fit a reference on a source manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--scheme", choices=SCHEMES, default="barycenter")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="reference directory")
    _add_welch(p)

    p = sub.add_parser("apply", help="normalize target subjects onto a fitted reference")
    p.add_argument("--manifest", required=True)
    p.add_argument("--reference", required=True, help="reference.json or its directory")
    p.add_argument("--scheme", choices=SCHEMES, help="default: the reference's scheme")
    p.add_argument("--eps", type=float)
    p.add_argument("--normalize-target", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    _add_welch(p, defaults=False)

    p = sub.add_parser("distance", help="distance between two PSD tables")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--metric", choices=("w2", "hellinger"), default="w2")

    p = sub.add_parser("synth", help="synthetic stationary Gaussian record from a PSD table")
    p.add_argument("--psd", required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--subject-id", default="synth")
    p.add_argument("--line-freq", type=float)
    p.add_argument("--line-amplitude", type=float, default=0.0)
    p.add_argument("--dtype", choices=io.DTYPES, default="f64le")
    p.add_argument("--out", required=True)

    p = sub.add_parser("template", help="write an EEG-like PSD template table")
    p.add_argument("--fs", type=float, default=256.0)
    p.add_argument("--nfft", type=int, default=512)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--highpass", type=float, default=1.0)
    p.add_argument("--knee", type=float, default=5.0)
    p.add_argument("--exponent", type=float, default=1.0)
    p.add_argument("--flat", action="store_true", help="white spectrum at --scale instead")
    p.add_argument("--line-freq", type=float)
    p.add_argument("--line-power", type=float, default=0.0)
    p.add_argument("--line-width", type=float, default=1.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("response", help="frequency response table of a filter file")
    p.add_argument("--filter", required=True)
    p.add_argument("--n-points", type=int, default=512)
    return parser


def _print_psd(psd, out=None):
    if out:
        io.write_psd(psd, out)
    else:
        sys.stdout.write("freq_hz,power\n")
        for f, v in zip(psd.freqs, psd.values):
            sys.stdout.write(f"{io.fmt(f)},{io.fmt(v)}\n")


def cmd_psd(args):
    manifest = io.read_manifest(args.manifest)
    welch = _welch(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    print("subject_id\tchannels\tpsd_path")
    for entry in manifest.subjects:
        record = io.load_record(entry, manifest.root)
        path = out / f"{entry.subject_id}.csv"
        io.write_psd(subject_psd(record, welch), path)
        print(f"{entry.subject_id}\t{record.n_channels}\t{path}")


def cmd_barycenter(args):
    psds = [io.read_psd(p) for p in args.psd]
    _print_psd(BARYCENTERS[args.scheme](psds), args.out)


def cmd_match(args):
    target = l1_normalize(io.read_psd(args.target))
    sources = [(path, psd, l1_normalize(psd)) for path in args.sources for psd in [io.read_psd(path)]]
    index, _ = match_subject(target, sources)
    distances = hellinger_to_sources(target, sources)
    json.dump(
        {"index": index, "source": args.sources[index], "hellinger": float(distances[index]),
         "distances": [float(d) for d in distances]},
        sys.stdout,
    )
    sys.stdout.write("\n")


def cmd_fit(args):
    config = PipelineConfig(welch=_welch(args), scheme=args.scheme, seed=args.seed)
    model = fit_reference(io.read_manifest(args.manifest), config)
    path = save_source_model(model, args.out)
    json.dump({"reference": str(path), "scheme": model.scheme, "source_count": len(model.source_ids),
               "fs_hz": model.fs_hz, "nfft": model.nfft}, sys.stdout)
    sys.stdout.write("\n")


def cmd_apply(args):
    model = load_source_model(args.reference)
    config = PipelineConfig(
        welch=_welch(args, base=model.welch),
        scheme=args.scheme or model.scheme,
        eps=args.eps,
        normalize_target=args.normalize_target,
        seed=args.seed,
    )
    results = fit_apply_target(io.read_manifest(args.manifest), model, config, args.out)
    sys.stdout.write(io.format_report([r.report for r in results]))


def cmd_distance(args):
    a, b = io.read_psd(args.a), io.read_psd(args.b)
    if args.metric == "w2":
        print(repr(w2_spectral(a, b)))
    else:
        print(repr(hellinger(l1_normalize(a), l1_normalize(b))))


def cmd_synth(args):
    psd = io.read_psd(args.psd)
    record = synth_record(psd, args.channels, args.length, args.seed, args.subject_id, args.line_freq, args.line_amplitude)
    entry = io.save_record(record, args.out, args.dtype)
    json.dump(entry.to_json(), sys.stdout)
    sys.stdout.write("\n")


def cmd_template(args):
    if args.flat:
        psd = eeg_like_psd(args.fs, args.nfft, args.scale, highpass_hz=0.0, exponent=0.0)
    else:
        psd = eeg_like_psd(args.fs, args.nfft, args.scale, args.highpass, args.knee, args.exponent)
    if args.line_freq is not None:
        psd = add_spectral_line(psd, args.line_freq, args.line_power, args.line_width)
    _print_psd(psd, args.out)


def cmd_response(args):
    f, _ = io.read_filter(args.filter)
    freqs, mag = frequency_response(f, args.n_points)
    sys.stdout.write("freq_hz,magnitude\n")
    for fr, m in zip(freqs, mag):
        sys.stdout.write(f"{io.fmt(fr)},{io.fmt(m)}\n")


COMMANDS = {
    "psd": cmd_psd,
    "barycenter": cmd_barycenter,
    "match": cmd_match,
    "fit": cmd_fit,
    "apply": cmd_apply,
    "distance": cmd_distance,
    "synth": cmd_synth,
    "template": cmd_template,
    "response": cmd_response,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "cmmn: error: a subcommand is required")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DataIOError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
