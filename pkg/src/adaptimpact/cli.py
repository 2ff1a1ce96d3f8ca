"""Command-line front end: every table and figure series as CSV plus a manifest."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import calibration as cal
from . import casestudy as cs
from . import dynamics as dyn
from . import io
from .errors import AdaptImpactError, ValidationError
from .model import (DEFAULT_QUOTA_TONNES, ModelParams, model_to_tonnes,
                    price_to_eur_per_kg, quota_in_model_units)

SPECIES = ("plaice", "sole")
BIFURCATION_RANGES = {"omega": (1.0, 0.65), "epsilon": (0.5, 0.48),
                      "chi1": (0.308, 0.093), "chi2": (0.308, 0.230)}


def parse_quota(text):
    """``none`` or ``plaice=T,sole=T`` (tonnes); omitted species are unregulated."""
    if text is None:
        return DEFAULT_QUOTA_TONNES
    if text.strip().lower() == "none":
        return (None, None)
    out = [None, None]
    for part in text.split(","):
        if "=" not in part:
            raise ValidationError(f"bad quota entry {part!r}; use species=tonnes")
        k, v = (s.strip() for s in part.split("=", 1))
        if k not in SPECIES:
            raise ValidationError(f"unknown species {k!r} in quota")
        try:
            out[SPECIES.index(k)] = float(v)
        except ValueError:
            raise ValidationError(f"quota for {k} is not a number: {v!r}") from None
    return tuple(out)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="key = value parameter file")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--quota", help="'none' or plaice=T,sole=T in tonnes")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--grid", type=int, help="grid size / number of starts / scan steps")
    common.add_argument("--allow-out-of-box", action="store_true")

    p = argparse.ArgumentParser(prog="adaptimpact", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("calibrate", parents=[common])
    c.add_argument("--data", nargs="+", required=True)
    c.add_argument("--max-nfev", type=int, default=10_000)
    sub.add_parser("steady-state", parents=[common]).add_argument(
        "--branch", choices=("upper", "lower"), default="upper")
    s = sub.add_parser("sweep", parents=[common])
    s.add_argument("driver", choices=cs.DRIVERS)
    s.add_argument("--lo", type=float)
    s.add_argument("--hi", type=float)
    b = sub.add_parser("bifurcate", parents=[common])
    b.add_argument("driver", choices=sorted(BIFURCATION_RANGES))
    b.add_argument("--to", type=float, help="end of the scan (default: box lower bound)")
    sub.add_parser("table4", parents=[common])
    sub.add_parser("figures", parents=[common])
    y = sub.add_parser("synthetic", parents=[common])
    y.add_argument("--noise", type=float, default=0.0)
    y.add_argument("--first-year", type=int, default=1990)
    y.add_argument("--last-year", type=int, default=2020)
    return p


class Run:
    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs = []
        if args.params:
            if not Path(args.params).exists():
                raise ValidationError(f"parameter file {args.params} does not exist")
            self.params = io.read_params(args.params)
            self.inputs.append(args.params)
        else:
            self.params = ModelParams()
        self.quota_tonnes = parse_quota(args.quota)
        self.quota = quota_in_model_units(self.quota_tonnes, self.params)
        self.outputs = []

    def write(self, name, rows, columns=None):
        path = self.out / name
        io.write_table(rows, path, columns)
        self.outputs.append(path)

    def manifest(self, config=None):
        cfg = {"quota_tonnes": list(self.quota_tonnes), "grid": self.args.grid,
               "allow_out_of_box": self.args.allow_out_of_box}
        cfg.update(config or {})
        io.write_manifest(self.out / "manifest.json", command=self.args.command,
                          inputs=self.inputs, outputs=self.outputs, params=self.params,
                          seeds={"seed": self.args.seed}, config=cfg, version=__version__)


def _state_row(label, st, params):
    row = {"label": label, "interior": bool(st.interior)}
    if st.interior:
        for i, sp in enumerate(SPECIES):
            row[f"stock_{sp}_t"] = float(model_to_tonnes(st.x[i], params))
        for i, sp in enumerate(SPECIES):
            row[f"quantity_{sp}_t"] = float(model_to_tonnes(st.q[i], params))
        for i, sp in enumerate(SPECIES):
            row[f"price_{sp}_eur_kg"] = float(price_to_eur_per_kg(st.p[i], params))
        row["fleet_metier1"], row["fleet_metier2"] = (float(v) for v in st.n)
        row["effort_metier1"], row["effort_metier2"] = (float(v) for v in st.e)
        row["exit_metier1"], row["exit_metier2"] = st.market.exited
        row["quota_binding_plaice"], row["quota_binding_sole"] = st.market.quota_binding
        row["stable"] = bool(st.stable)
        row["residual"] = float(st.residual)
    return row


def cmd_steady_state(run):
    st = dyn.find_steady_state(run.params, run.quota, branch=run.args.branch)
    run.write("steady_state.csv", [_state_row(run.args.branch, st, run.params)])
    others = dyn.steady_states(run.params, run.quota)
    run.write("steady_states_all.csv", [_state_row(f"root{i}", s, run.params)
                                        for i, s in enumerate(others)])
    run.manifest({"branch": run.args.branch})


def cmd_table4(run):
    rows = dyn.relative_steady_table(run.params, quota=run.quota)
    out = []
    for r in rows:
        row = {"row": r.label, "driver": r.driver or "", "value": r.value if r.value is not None else float("nan"),
               "interior": r.interior}
        for key in ("stocks", "quantities", "prices", "fleets"):
            arr = getattr(r, key)
            for i, sp in enumerate(("1", "2")):
                row[f"{key}_{sp}_pct"] = float(100 * arr[i]) if arr is not None else float("nan")
        row["exit_metier1"], row["exit_metier2"] = r.exited
        out.append(row)
    run.write("table4.csv", out)
    run.manifest()


def _config(run, n_default=101):
    return cs.CaseStudyConfig(params=run.params, quota=run.quota, n=run.args.grid or n_default)


def _curve_rows(curves):
    rows = []
    d = curves.driver
    for variant, recs in (("fishers", curves.records), ("households", curves.overlay)):
        if recs is None:
            continue
        for rec, flag in zip(recs, curves.budget_flags):
            for j, prop in enumerate(cs.PROPERTIES):
                if variant == "households" and prop != "U":
                    continue
                rows.append({"driver": d, "value": rec.theta[d], "exposure": rec.theta[d] - curves.base_value,
                             "property": prop, "S": float(rec.S[j]), "aA": float(rec.aA[j]),
                             "TI": float(rec.TI[j]), "variant": variant, "role": rec.role,
                             "negative_budget": bool(flag),
                             "one_sided": ";".join(rec.one_sided)})
    return rows


def cmd_sweep(run):
    cfg = _config(run)
    driver = run.args.driver
    lo, hi = cfg.bounds[driver]
    lo = run.args.lo if run.args.lo is not None else lo
    hi = run.args.hi if run.args.hi is not None else hi
    box = cs.EXPOSURE_BOX[driver]
    if not run.args.allow_out_of_box and (lo < box[0] or hi > box[1]):
        raise ValidationError(f"sweep bounds ({lo}, {hi}) leave the exposure box {box}; "
                              "pass --allow-out-of-box to override")
    bounds = dict(cfg.bounds)
    bounds[driver] = (min(lo, cfg.params.get(driver)), max(hi, cfg.params.get(driver)))
    cfg = cs.CaseStudyConfig(params=cfg.params, bounds=bounds, quota=cfg.quota, n=cfg.n)
    model = cs.FlatfishModel(cfg)
    model.box = dict(bounds)
    hh = cs.FlatfishModel(cfg, household=True, base=model.base)
    hh.box = dict(bounds)
    curves = cs.analyze_driver(cfg, driver, marginals=False, models=(model, hh))
    run.write(f"sweep_{driver}.csv", _curve_rows(curves))
    run.manifest({"driver": driver, "bounds": [lo, hi], "n": cfg.n})


def cmd_figures(run):
    cfg = _config(run)
    models = cs._models(cfg)
    curves = {d: cs.analyze_driver(cfg, d, marginals=False, models=models) for d in cs.DRIVERS}
    for d, c in curves.items():
        run.write(f"sweep_{d}.csv", _curve_rows(c))
    run.write("absolute_summary.csv", cs.absolute_summary(cfg, curves))
    run.write("marginal_summary.csv", cs.marginal_summary(cfg, models=models))
    run.manifest({"n": cfg.n})


def cmd_bifurcate(run):
    driver = run.args.driver
    start, stop = BIFURCATION_RANGES[driver]
    start = run.params.get(driver)
    if run.args.to is not None:
        stop = run.args.to
        box = cs.EXPOSURE_BOX.get(driver, (-np.inf, np.inf))
        if not run.args.allow_out_of_box and not box[0] <= stop <= box[1]:
            raise ValidationError(f"scan end {stop} outside the exposure box {box}")
    steps = run.args.grid or 200
    res = dyn.bifurcation_scan(run.params, driver, (start, stop), steps, quota=run.quota)
    run.write(f"branch_{driver}.csv", [dict(_state_row("branch", st, run.params), value=v)
                                       for v, st in res.branch])
    run.write(f"bifurcation_{driver}.csv", [{
        "driver": driver, "found": res.found, "side": res.side,
        "last_interior": res.last_interior if res.last_interior is not None else float("nan"),
        "first_without": res.first_without if res.first_without is not None else float("nan"),
        "relative_critical": (res.critical / start) if res.found else float("nan"),
        "message": res.message}])
    run.manifest({"driver": driver, "range": [start, stop], "steps": steps})


def cmd_calibrate(run):
    ds = io.load_dataset(run.args.data)
    run.inputs.extend(run.args.data)
    size = run.args.grid or 519
    grid = cal.initial_grid(cal.default_ranges(run.params), size=size, seed=run.args.seed)
    res = cal.calibrate(ds, grid=grid, base=run.params, max_nfev=run.args.max_nfev)
    run.params = res.params
    io.write_params(res.params, run.out / "calibrated_params.txt")
    run.outputs.append(run.out / "calibrated_params.txt")
    run.write("calibration.csv", [dict(name=k, value=float(res.params.get(k))) for k in cal.CALIBRATED]
              + [dict(name="zeta", value=res.zeta)])
    run.write("fit_statistics.csv", [dict(series=k, theil_u=v) for k, v in res.theil.items()])
    run.write("candidates.csv", [dict(index=c.index, zeta=c.zeta, nfev=c.nfev, status=c.status,
                                      feasible="" if c.feasible is None else bool(c.feasible),
                                      **{k: c.values[k] for k in cal.CALIBRATED})
                                 for c in res.candidates])
    run.manifest({"starts": size, "feasible": res.feasible, "winner": res.winner})


def cmd_synthetic(run):
    years = range(run.args.first_year, run.args.last_year + 1)
    ds = io.generate_synthetic(run.params, years, run.args.noise, run.args.seed)
    path = run.out / "synthetic.csv"
    io.save_dataset(ds, path)
    run.outputs.append(path)
    run.manifest({"noise": run.args.noise, "years": [years.start, years.stop - 1]})


COMMANDS = {"calibrate": cmd_calibrate, "steady-state": cmd_steady_state, "sweep": cmd_sweep,
            "bifurcate": cmd_bifurcate, "table4": cmd_table4, "figures": cmd_figures,
            "synthetic": cmd_synthetic}


def main(argv=None):
    args = build_parser().parse_args(argv)  # exits with status 2 on usage errors
    try:
        COMMANDS[args.command](Run(args))
    except AdaptImpactError as exc:
        json.dump({"category": exc.category, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
