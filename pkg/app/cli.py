"""Command-line front end for the lab."""

import functools
import io
import sys
from fractions import Fraction
from pathlib import Path
from typing import List, Optional

import click

from . import __version__
from .core.config import configure_logging, load_lab_config, settings
from .core.exceptions import CheckFailure, LabError, ParseError
from .models.dyadic import DyadicInterval, format_decimal, parse_dyadic
from .models.schemas import CheckStatus, PrefixMode
from .services.lab_runner import LabRunner, write_csv
from .services.selftest import run_selftest


def handle_lab_errors(func):
    """Report LabErrors on stderr and exit with their code"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except LabError as e:
            click.echo(f"error: {type(e).__name__}: {e}", err=True)
            sys.exit(e.exit_code)

    return wrapper


def _runner(ctx: click.Context) -> LabRunner:
    return LabRunner(load_lab_config(ctx.obj["config_path"]))


def _exact(value: Fraction) -> str:
    return f"{value}\n{format_decimal(value, settings.decimal_places)}"


def _parse_depths(depths: Optional[str], depth: Optional[int]) -> List[int]:
    if depths is not None:
        items = [d.strip() for d in depths.split(",") if d.strip()]
        if not all(d.isdigit() for d in items):
            raise ParseError(f"depths must be a comma-separated list of integers: {depths!r}")
        values = [int(d) for d in items]
        if any(a >= b for a, b in zip(values, values[1:])):
            raise ParseError(f"depths must be increasing: {depths!r}")
        return values
    return list(range(1, depth + 1))


@click.group()
@click.version_option(__version__, prog_name=settings.app_name)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Lab configuration (YAML). Defaults to CANTORLAB_CONFIG or configs/default.yaml")
@click.option("--log-level", default=None, help="Override LOG_LEVEL")
@click.pass_context
def main(ctx: click.Context, config_path: Optional[str], log_level: Optional[str]):
    """Cantorlab: exact computable measures on Cantor space."""
    configure_logging(log_level)
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@main.command("eval-p")
@click.argument("rect", nargs=-1, required=True)
@click.pass_context
@handle_lab_errors
def eval_p(ctx: click.Context, rect):
    """Exact P(I x [cyl]) for RECT written as 'lo hi cyl'."""
    click.echo(_exact(_runner(ctx).eval_p(" ".join(rect))))


@main.command("eval-phat")
@click.argument("k", type=click.IntRange(min=0))
@click.argument("cyl", default="")
@click.pass_context
@handle_lab_errors
def eval_phat(ctx: click.Context, k: int, cyl: str):
    """Raw and normalized mass of {K} x [CYL] under the c.e.-density measure."""
    raw, normalized = _runner(ctx).eval_phat(k, cyl)
    click.echo(f"raw {raw} {format_decimal(raw, settings.decimal_places)}")
    click.echo(f"normalized {normalized} {format_decimal(normalized, settings.decimal_places)}")


@main.command()
@click.option("--mode", type=click.Choice([m.value for m in PrefixMode]), default=PrefixMode.VLF.value)
@click.option("--interval", "interval_text", default="1/2 1", help="vlf: interval 'lo hi' of the first coordinate")
@click.option("--index", "k", type=click.IntRange(min=0), default=2, help="ce: queried index k")
@click.option("--prefix", "prefix_bits", default="1", help="Explicit prefix of beta ('-' for empty)")
@click.option("--tail", type=click.Choice(["0", "1", "none"]), default=None,
              help="Bit repeating after the prefix; defaults to 1 for vlf and 0 for ce")
@click.option("--sample-seed", type=int, default=None, help="Sample beta from the marginal instead")
@click.option("--depths", default=None, help="Comma-separated increasing depths")
@click.option("--depth", type=click.IntRange(min=0), default=None, help="Use depths 1..N")
@click.option("--eps", default=None, help="ce: target width as p/2^k")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="Write CSV here instead of stdout")
@click.pass_context
@handle_lab_errors
def converge(ctx, mode, interval_text, k, prefix_bits, tail, sample_seed, depths, depth, eps, csv_path):
    """Finite-depth conditionals along a prefix of beta, as CSV."""
    runner = _runner(ctx)
    mode = PrefixMode(mode)
    depth_list = _parse_depths(depths, depth if depth is not None else runner.config.experiment.max_depth)

    if tail is None:
        tail = "1" if mode == PrefixMode.VLF else "0"
    tail_bit = None if tail == "none" else int(tail)
    source = runner.prefix_source(mode, prefix_bits, tail_bit, sample_seed)

    if mode == PrefixMode.VLF:
        tokens = interval_text.split()
        if len(tokens) != 2:
            raise ParseError(f"interval must read 'lo hi', got {interval_text!r}")
        try:
            interval = DyadicInterval(parse_dyadic(tokens[0]), parse_dyadic(tokens[1]))
        except ValueError as e:
            raise ParseError(str(e))
        rows = runner.converge_vlf(interval, source, depth_list)
    else:
        target = parse_dyadic(eps).value if eps is not None else runner.config.experiment.eps.value
        rows = runner.converge_ce(k, source, depth_list, target)

    if csv_path is not None:
        with open(csv_path, "w", newline="") as stream:
            write_csv(rows, stream)
    else:
        buffer = io.StringIO()
        write_csv(rows, buffer)
        click.echo(buffer.getvalue(), nl=False)


@main.command("trim-demo")
@click.argument("level_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--probe", "probes", multiple=True, help="Probe point p/2^k (repeatable); defaults to alpha_1..alpha_16")
@click.pass_context
@handle_lab_errors
def trim_demo(ctx, level_file, probes):
    """Trim a test level and verify both trimming conditions."""
    runner = _runner(ctx)
    points = [parse_dyadic(p) for p in probes] or None
    report = runner.trim_demo(Path(level_file), points)
    for line in report.lines():
        click.echo(line)
    if not report.passed:
        raise CheckFailure(f"level {report.index} failed verification")


@main.command()
@click.option("--prefix", "prefix_bits", default="-", help="Prefix of beta; continued by zeros")
@click.option("--sample-seed", type=int, default=None, help="Sample beta from the marginal instead")
@click.option("--batch", type=click.IntRange(min=0), default=None, help="Decode N random instances instead")
@click.option("--prefixes", type=click.IntRange(min=1), default=None, help="Sampled prefixes per batch instance")
@click.option("--seed", type=int, default=None, help="Batch seed")
@click.pass_context
@handle_lab_errors
def decode(ctx, prefix_bits, sample_seed, batch, prefixes, seed):
    """Recover the configured set from certified conditionals alone."""
    runner = _runner(ctx)
    if batch is not None:
        summary = runner.decode_batch(batch, prefixes, seed)
        click.echo(summary.model_dump_json(indent=2))
        if not summary.passed:
            raise CheckFailure(f"{summary.mismatches} mismatches and {summary.exhausted} undecided rows")
        return

    if not runner.config.ce.paired:
        raise ParseError("decode needs 'paired: true' in the ce section")
    source = runner.prefix_source(PrefixMode.CE, prefix_bits, 0, sample_seed)
    rows = runner.decode(source)
    click.echo(f"{'n':>4} {'decoded':>8} {'truth':>6} {'queries':>8}  status")
    for row in rows:
        decoded = "-" if row.decoded is None else str(row.decoded).lower()
        click.echo(f"{row.n:>4} {decoded:>8} {str(row.truth).lower():>6} {row.queries:>8}  {row.status}")
    wrong = [row.n for row in rows if not row.matches]
    if wrong:
        raise CheckFailure(f"decoding disagrees with the configured set at n={wrong}")


@main.command()
@click.option("--mode", type=click.Choice([m.value for m in PrefixMode]), default=PrefixMode.CE.value)
@click.option("--seed", type=int, default=None, help="First seed (defaults to the config seed)")
@click.option("--count", type=click.IntRange(min=1), default=5)
@click.option("--depth", type=click.IntRange(min=1), default=None)
@click.pass_context
@handle_lab_errors
def sample(ctx, mode, seed, count, depth):
    """Print prefixes of beta drawn from the marginal, one per seed."""
    runner = _runner(ctx)
    experiment = runner.config.experiment
    first = experiment.seed if seed is None else seed
    depth = experiment.max_depth if depth is None else depth
    for offset, prefix in enumerate(runner.sample(PrefixMode(mode), first, count, depth)):
        click.echo(f"{first + offset} {prefix.bits}")


@main.command()
@click.option("--workers", type=click.IntRange(min=1), default=None)
@click.pass_context
@handle_lab_errors
def selftest(ctx, workers):
    """Run every property suite and print a JSON summary."""
    config = load_lab_config(ctx.obj["config_path"])
    summary = run_selftest(config, workers)
    click.echo(summary.model_dump_json(indent=2))
    if not summary.passed:
        failed = [s.name for s in summary.suites if s.status != CheckStatus.PASS]
        raise CheckFailure(f"suites failed: {', '.join(failed)}")


if __name__ == "__main__":
    main()
