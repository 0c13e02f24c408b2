"""Command-line entry point."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import click
import numpy as np

from tailsitter.equilibria import (
    HOVER_LAYOUT,
    hover_equilibrium,
    linearize_analytic_hover,
    linearize_fd,
    trim_level_flight,
)
from tailsitter.mathkin import euler_from_quat
from tailsitter.vehicle import load_params, virtual_from_effective


def matrix_csv(name: str, M: np.ndarray, rows, cols) -> str:
    """CSV block: header ``name,<cols>`` then one labelled row per matrix row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([name, *cols])
    for label, r in zip(rows, np.atleast_2d(M)):
        w.writerow([label, *(repr(float(v)) for v in r)])
    return buf.getvalue().rstrip("\n")


@click.group()
@click.option("--params", "params_path", type=click.Path(exists=True, dir_okay=False),
              help="Vehicle parameter YAML (defaults to the bundled set).")
@click.pass_context
def main(ctx: click.Context, params_path: str | None) -> None:
    """Tail-sitter flight dynamics and control toolkit."""
    ctx.obj = load_params(params_path)


@main.command()
@click.option("--scenario", required=True, help="Scenario YAML file or bundled name.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--plot", is_flag=True, help="Also write SVG charts.")
@click.pass_obj
def simulate(params, scenario: str, out_dir: str, plot: bool) -> None:
    """Run a closed-loop scenario and write its CSV log."""
    from tailsitter.plots import emit_plots
    from tailsitter.sim import load_scenario, run_scenario, write_csv, write_jumps_csv, write_settings

    s = load_scenario(scenario, params)
    log = run_scenario(s, params)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(log, out / f"{s.name}.csv")
    write_jumps_csv(log, out / f"{s.name}_jumps.csv")
    write_settings(log, out / f"{s.name}_settings.json")
    if plot:
        emit_plots(log, out / "plots")
    ill = np.sum(log.column("kappa") > 1e14)
    final = log.record(len(log) - 1)
    click.echo(f"{s.name}: {len(log)} records, {len(log.jumps)} jumps, "
               f"final p = {np.round(final.p, 3).tolist()}")
    if ill:
        click.echo(f"warning: {ill} steps with allocation condition number above 1e14")


@main.command()
@click.option("--speed", type=float, required=True, help="Airspeed in m/s.")
@click.pass_obj
def trim(params, speed: float) -> None:
    """Level-flight trim at the given airspeed."""
    eq = trim_level_flight(params, speed)
    up = virtual_from_effective(eq.u_eq)
    fields = {
        "airspeed": speed,
        **{f"u{i + 1}": v for i, v in enumerate(eq.u_eq)},
        **{f"q_{i}": v for i, v in enumerate(eq.x_eq[6:10])},
        "pitch_deg": np.degrees(euler_from_quat(eq.x_eq[6:10])[1]),
        "t_sum": up[0],
        "delta_deg": np.degrees(up[2] / 2),
        "residual": eq.residual_norm,
    }
    click.echo(",".join(fields))
    click.echo(",".join(repr(float(v)) for v in fields.values()))


@main.command()
@click.option("--at", "point", default="hover",
              help="'hover' or 'trim:<speed>' (flight layout).")
@click.option("--numeric", is_flag=True, help="Finite differences instead of closed form (hover).")
@click.pass_obj
def linearize(params, point: str, numeric: bool) -> None:
    """Print the A and B matrices at an operating point."""
    if point == "hover":
        lm = (linearize_fd(params, hover_equilibrium(params)) if numeric
              else linearize_analytic_hover(params))
    elif point.startswith("trim:"):
        lm = linearize_fd(params, trim_level_flight(params, float(point[5:])), layout="flight")
    else:
        raise click.BadParameter("expected 'hover' or 'trim:<speed>'", param_hint="--at")
    click.echo(matrix_csv("A", lm.A, lm.layout, lm.layout))
    click.echo()
    click.echo(matrix_csv("B", lm.B, lm.layout, ("u1", "u2", "u3", "u4")))


@main.command()
@click.option("--at", "point", default="hover", type=click.Choice(["hover"]))
@click.option("--integrator", is_flag=True, help="Augment with position integrators.")
@click.option("--scale", type=float, default=10.0, help="Q = R = scale * I.")
@click.pass_obj
def lqr(params, point: str, integrator: bool, scale: float) -> None:
    """Hover LQR gain (reported with the zero scalar-quaternion column)."""
    from tailsitter.lqr import expand_gain_with_scalar_part
    from tailsitter.sim import design_hover_lqr

    design = design_hover_lqr(params, scale, integrator).design
    K = expand_gain_with_scalar_part(design.K)
    states = list(HOVER_LAYOUT[:6]) + ["eta"] + list(HOVER_LAYOUT[6:])
    reduced = list(HOVER_LAYOUT)
    if integrator:
        states += ["xi_x", "xi_y", "xi_z"]
        reduced += ["xi_x", "xi_y", "xi_z"]
    click.echo(matrix_csv("K", K, ("u1", "u2", "u3", "u4"), states))
    click.echo()
    click.echo(matrix_csv("S", design.S, reduced, reduced))
    click.echo()
    eigs = design.closed_loop_eigs
    order = np.argsort(eigs.real)
    click.echo("eig,real,imag")
    for i, e in enumerate(eigs[order]):
        click.echo(f"{i},{float(e.real)!r},{float(e.imag)!r}")


@main.command()
@click.option("--samples", type=int, default=20)
@click.option("--seed", type=int, default=0)
@click.option("--workers", type=int, default=1)
@click.option("--scale", type=float, default=10.0, help="Q = R = scale * I.")
@click.pass_obj
def roa(params, samples: int, seed: int, workers: int, scale: float) -> None:
    """Sampled region-of-attraction level of the hover LQR loop."""
    from tailsitter.sim import design_hover_lqr, estimate_roa

    est = estimate_roa(design_hover_lqr(params, scale), params, samples, seed=seed,
                       workers=workers)
    click.echo("sample,V0,converged")
    for i, s in enumerate(est.samples):
        click.echo(f"{i},{s.V0!r},{int(s.converged)}")
    click.echo(f"c_star,{est.c_star!r},")


@main.command()
@click.pass_obj
def contrast(params) -> None:
    """Compare transit speeds of the hover_45 and flight_vplane scenarios."""
    from tailsitter.sim import energy_contrast, format_contrast, load_scenario, run_scenario

    hs = load_scenario("hover_45", params)
    fs = load_scenario("flight_vplane", params)
    report = energy_contrast(run_scenario(hs, params), hs.targets[-1][1],
                             run_scenario(fs, params), fs.targets[-1][1])
    click.echo(format_contrast(report))


if __name__ == "__main__":
    main()
