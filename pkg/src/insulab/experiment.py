"""Experiment orchestration: config parsing, the staged pipeline,
checkpoint/resume, artifact files and convergence reports.

A run executes, in order: the (sigma, delta) continuation ladder at the
first exponent, the volume-scale tuning loop (if eps = auto), the exponent
sweep, then free-boundary extraction and the verification suite.  Every
solver stage checkpoints its field; a resumed run reproduces the
uninterrupted outputs byte for byte because each stage is a deterministic
function of the previous checkpoint.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .energy import cell_gradient_magnitude
from .freeboundary import (ContourSet, NoBoundary, ScanUnderpowered,
                           density_ratios, extract_contour, growth_scan,
                           hausdorff_distance, interior_contact_boundary,
                           write_contours)
from .geometry import (DomainSpec, competitor_seed, default_threshold,
                       positive_volume_outside, radial_domain, rasterize_disk,
                       synth_plateau_bump)
from .grids import ScalarField, build_grid, load_field, save_field
from .penalties import PenaltyParams
from .solver import (ContinuationSchedule, SolveOptions, SolveReport,
                     StepFailure, VolumeNotSaturable, clear_ramp_band,
                     minimize, tune_epsilon)
from .verify import (RadialOracle, bounds_and_constraints_check,
                     classify_regions, radial_cone_field, region_sign_check)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_FAILED = 3

# volume mismatch accepted by the auto eps tuner, relative to gamma
AUTO_EPS_TARGET_TOL = 0.05
# region sign tolerance: criterion is 10 * h * residual scale
REGION_SIGN_FACTOR = 10.0


class ConfigError(Exception):
    """The experiment config does not parse or describes an impossible run."""


@dataclass
class ExperimentConfig:
    bbox: tuple[float, float, float, float]
    h: float
    gamma: float
    # disk room (mask_file overrides)
    omega_radius: float | None = None
    center: tuple[float, float] = (0.0, 0.0)
    mask_file: str | None = None
    # plateau obstacle (field_file overrides; "none" -> zero obstacle)
    obstacle: str = "plateau"
    r0: float | None = None
    height: float | None = None
    ramp_width: float | None = None
    field_file: str | None = None
    # schedule
    sigmas: tuple[float, ...] = ()
    deltas: tuple[float, ...] = ()
    ps: tuple[float, ...] = ()
    eps: float | str = "auto"
    # solver + run
    solver: SolveOptions = field(default_factory=SolveOptions)
    output_dir: str = "out"
    seed: int = 0
    raw_text: str = ""

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.raw_text.encode()).hexdigest()


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split())
    except ValueError as err:
        raise ConfigError(f"bad number list {text!r}: {err}") from err


def parse_config(path: str) -> ExperimentConfig:
    """Read the flat key=value experiment file; raise ConfigError on any
    malformed or internally inconsistent input."""
    try:
        with open(path) as f:
            raw = f.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    cp = configparser.ConfigParser()
    try:
        cp.read_string(raw)
    except configparser.Error as err:
        raise ConfigError(f"config parse error: {err}") from err

    try:
        bbox = _floats(cp.get("grid", "bbox"))
        if len(bbox) != 4:
            raise ConfigError(f"bbox needs 4 numbers, got {len(bbox)}")
        cfg = ExperimentConfig(
            bbox=bbox,
            h=cp.getfloat("grid", "h"),
            gamma=cp.getfloat("domain", "gamma"),
            raw_text=raw,
        )
        dom = cp["domain"]
        if "mask_file" in dom:
            cfg.mask_file = dom["mask_file"]
        else:
            cfg.omega_radius = float(dom["omega_radius"])
            if "center" in dom:
                cx, cy = _floats(dom["center"])
                cfg.center = (cx, cy)
        cfg.obstacle = dom.get("obstacle", "plateau")
        if cfg.obstacle == "plateau":
            cfg.r0 = float(dom["r0"])
            cfg.height = float(dom["height"])
            cfg.ramp_width = float(dom["ramp_width"])
        elif cfg.obstacle == "file":
            cfg.field_file = dom["field_file"]
        elif cfg.obstacle != "none":
            raise ConfigError(f"unknown obstacle kind {cfg.obstacle!r}")

        sch = cp["schedule"]
        cfg.sigmas = _floats(sch["sigmas"])
        cfg.deltas = _floats(sch["deltas"])
        cfg.ps = _floats(sch["ps"])
        eps_text = sch.get("eps", "auto").strip()
        cfg.eps = "auto" if eps_text == "auto" else float(eps_text)

        if cp.has_section("solver"):
            kwargs = {}
            sv = cp["solver"]
            for key, cast in (("max_iters", int), ("tol_grad", float),
                              ("tol_energy", float), ("corner_frac", float),
                              ("polish_iters", int)):
                if key in sv:
                    kwargs[key] = cast(sv[key])
            cfg.solver = SolveOptions(**kwargs)
        if cp.has_section("output"):
            cfg.output_dir = cp["output"].get("directory", cfg.output_dir)
            cfg.seed = cp["output"].getint("seed", cfg.seed)
    except ConfigError:
        raise
    except (configparser.Error, KeyError, ValueError) as err:
        raise ConfigError(f"bad config: {err}") from err

    # schedule sanity via the solver's own validator
    try:
        eps_probe = 1.0 if cfg.eps == "auto" else float(cfg.eps)
        ContinuationSchedule(sigmas=cfg.sigmas, deltas=cfg.deltas,
                             ps=cfg.ps, eps=eps_probe)
    except ValueError as err:
        raise ConfigError(f"bad schedule: {err}") from err
    return cfg


def build_problem(cfg: ExperimentConfig) -> DomainSpec:
    """Materialize the grid and domain; check the volume budget is even
    representable on the grid."""
    try:
        grid = build_grid(cfg.bbox, cfg.h)
    except ValueError as err:
        raise ConfigError(str(err)) from err

    if cfg.mask_file is not None:
        try:
            mask = load_field(cfg.mask_file)
        except (OSError, ValueError) as err:
            raise ConfigError(f"cannot load mask {cfg.mask_file}: {err}") from err
        if mask.grid != grid:
            raise ConfigError("mask file grid does not match the config grid")
    else:
        mask = rasterize_disk(cfg.center, cfg.omega_radius, grid)

    if cfg.obstacle == "none":
        phi = ScalarField.full(grid, 0.0)
    elif cfg.obstacle == "file":
        try:
            phi = load_field(cfg.field_file)
        except (OSError, ValueError) as err:
            raise ConfigError(f"cannot load obstacle {cfg.field_file}: {err}") from err
        if phi.grid != grid:
            raise ConfigError("obstacle file grid does not match the config grid")
    else:
        try:
            phi = synth_plateau_bump((cfg.r0, cfg.height, cfg.ramp_width),
                                     cfg.center, grid,
                                     omega_radius=cfg.omega_radius)
        except ValueError as err:
            raise ConfigError(str(err)) from err

    if cfg.mask_file is None and cfg.obstacle == "plateau":
        domain = radial_domain(grid, cfg.omega_radius, cfg.r0, cfg.height,
                               cfg.ramp_width, cfg.gamma, center=cfg.center)
    else:
        try:
            domain = DomainSpec(omega_mask=mask, phi=phi, gamma=cfg.gamma)
        except ValueError as err:
            raise ConfigError(str(err)) from err

    outside_area = cfg.h**2 * int(np.count_nonzero(domain.outside()))
    if cfg.gamma >= outside_area:
        raise ConfigError(
            f"volume budget gamma={cfg.gamma} is infeasible: the grid has "
            f"only {outside_area} area outside the room")
    return domain


# --- checkpoint state -------------------------------------------------------


@dataclass
class RunState:
    """Append-only key=value log in the checkpoint directory."""

    path: str
    entries: list[tuple[str, str]] = field(default_factory=list)

    @classmethod
    def load(cls, path: str) -> "RunState":
        state = cls(path=path)
        if os.path.exists(path):
            with open(path) as f:
                for line in f:
                    line = line.strip()
                    if line:
                        key, _, value = line.partition("=")
                        state.entries.append((key, value))
        return state

    def append(self, key: str, value: str):
        self.entries.append((key, str(value)))
        with open(self.path, "a") as f:
            f.write(f"{key}={value}\n")

    def get(self, key: str) -> str | None:
        for k, v in reversed(self.entries):
            if k == key:
                return v
        return None

    def completed_stages(self) -> list[str]:
        return [v for k, v in self.entries if k == "stage"]


def _stage_solve(u, domain, params, cfg, tau):
    try:
        return minimize(u, domain, params, cfg.solver, tau=tau)
    except StepFailure as err:
        raise SolverFailed(str(err)) from err


class SolverFailed(RuntimeError):
    pass


def _p_tag(p: float) -> str:
    return f"{p:g}".replace(".", "_")


@dataclass
class RunResult:
    exit_code: int
    out_dir: str
    messages: list[str] = field(default_factory=list)


def run_experiment(config_path: str, resume_dir: str | None = None,
                   threads: int = 1, quiet: bool = False) -> RunResult:
    """Execute (or resume) the full pipeline; never raises for expected
    failure modes — the exit code in the result encodes them."""
    log: list[str] = []

    def say(msg: str):
        log.append(msg)
        if not quiet:
            print(msg, flush=True)

    try:
        if resume_dir is not None:
            config_path = os.path.join(resume_dir, "config.ini")
        cfg = parse_config(config_path)
        if resume_dir is not None:
            cfg.output_dir = resume_dir
        domain = build_problem(cfg)
    except ConfigError as err:
        log.append(f"config error: {err}")
        if not quiet:
            print(log[-1], flush=True)
        return RunResult(EXIT_CONFIG_ERROR, resume_dir or "", log)

    out = cfg.output_dir
    ckpt = os.path.join(out, "checkpoints")
    os.makedirs(ckpt, exist_ok=True)
    for sub in ("fields", "contours", "scans", "report"):
        os.makedirs(os.path.join(out, sub), exist_ok=True)

    state_path = os.path.join(ckpt, "state.txt")
    config_copy = os.path.join(out, "config.ini")
    if resume_dir is None:
        if os.path.exists(state_path):
            os.remove(state_path)
        with open(config_copy, "w") as f:
            f.write(cfg.raw_text)
        state = RunState.load(state_path)
        state.append("config_sha256", cfg.sha256)
    else:
        state = RunState.load(state_path)
        recorded = state.get("config_sha256")
        if recorded is None or recorded != cfg.sha256:
            log.append("resume error: checkpoint config hash mismatch")
            return RunResult(EXIT_CONFIG_ERROR, out, log)
        done = state.get("exit")
        if done is not None:
            say(f"run already complete (exit {done}); nothing to resume")
            return RunResult(int(done), out, log)

    tau = default_threshold(domain)
    completed = state.completed_stages()

    def checkpoint(name: str, u: ScalarField, report: SolveReport,
                   sigma, delta, eps, p):
        save_field(os.path.join(ckpt, f"{name}.field"), u)
        with open(os.path.join(ckpt, f"{name}.meta"), "w") as f:
            f.write(f"stage={name}\nsigma={sigma:.17g}\ndelta={delta:.17g}\n"
                    f"eps={eps:.17g}\np={p:.17g}\n"
                    f"energy_total={report.energy.total:.17g}\n"
                    f"energy_dirichlet={report.energy.dirichlet:.17g}\n"
                    f"energy_obstacle={report.energy.obstacle:.17g}\n"
                    f"energy_volume={report.energy.volume:.17g}\n"
                    f"volume_outside={report.volume_outside:.17g}\n"
                    f"lip_estimate={report.lip_estimate:.17g}\n"
                    f"iters={report.iters}\ngrad_norm={report.grad_norm:.17g}\n"
                    f"converged={int(report.converged)}\n")
        state.append("stage", name)

    def load_stage(name: str) -> ScalarField:
        return load_field(os.path.join(ckpt, f"{name}.field"))

    try:
        u = competitor_seed(domain, tau)
        if completed:
            u = load_stage(completed[-1])

        # 1) continuation ladder at the first exponent.  With eps = auto
        # the ladder runs at a small provisional eps: below the budget the
        # volume term is then nearly free, so the seeded positivity set
        # survives the continuation and the tuner only fine-tunes.
        eps0 = 0.01 if cfg.eps == "auto" else float(cfg.eps)
        schedule = ContinuationSchedule(sigmas=cfg.sigmas, deltas=cfg.deltas,
                                        ps=cfg.ps, eps=eps0)
        stages = schedule.stages()
        p0 = cfg.ps[0]
        for idx, (sigma, delta) in enumerate(stages):
            name = f"cont_{idx:02d}"
            if name in completed:
                continue
            if idx > 0 and delta < stages[idx - 1][1]:
                u = clear_ramp_band(u, domain, stages[idx - 1][1])
            params = PenaltyParams(sigma=sigma, delta=delta, eps=eps0,
                                   p=p0, gamma=cfg.gamma)
            u, report = _stage_solve(u, domain, params, cfg, tau)
            checkpoint(name, u, report, sigma, delta, eps0, p0)
            say(f"{name}: sigma={sigma:g} delta={delta:g} iters={report.iters} "
                f"E={report.energy.total:.6g}")

        sigma_f, delta_f = stages[-1]

        # 2) volume-scale tuning (eps = auto): bisect from below until the
        # measured outside volume saturates the budget
        if cfg.eps == "auto":
            recorded = state.get("eps_star")
            if recorded is not None:
                eps_star = float(recorded)
            else:
                # tuning restarts cleanly from the continuation result; a
                # partially tuned checkpoint trail is discarded (the probe
                # ladder is cheap relative to the solves around it)
                for stale in os.listdir(ckpt):
                    if stale.startswith("tune_"):
                        os.remove(os.path.join(ckpt, stale))
                u = load_stage(f"cont_{len(stages) - 1:02d}")
                probe_idx = 0

                def on_probe(eps, vol, u_new, report):
                    nonlocal probe_idx
                    checkpoint(f"tune_{probe_idx:02d}", u_new, report,
                               sigma_f, delta_f, eps, p0)
                    say(f"tune_{probe_idx:02d}: eps={eps:g} volume={vol:.6g} "
                        f"target={cfg.gamma:g}")
                    probe_idx += 1

                eps_star, u, _ = tune_epsilon(
                    domain, schedule, AUTO_EPS_TARGET_TOL, cfg.solver,
                    u0=u, on_probe=on_probe)
                state.append("eps_star", f"{eps_star:.17g}")
        else:
            eps_star = float(cfg.eps)

        # 3) exponent sweep at the penalty floors and tuned eps
        sweep: list[tuple[float, ScalarField]] = []
        for p in cfg.ps:
            name = f"sweep_p{_p_tag(p)}"
            if name in completed:
                u = load_stage(name)
            else:
                params = PenaltyParams(sigma=sigma_f, delta=delta_f,
                                       eps=eps_star, p=p, gamma=cfg.gamma)
                u, report = _stage_solve(u, domain, params, cfg, tau)
                checkpoint(name, u, report, sigma_f, delta_f, eps_star, p)
                say(f"{name}: iters={report.iters} lip={report.lip_estimate:.4g} "
                    f"vol={report.volume_outside:.6g}")
            sweep.append((p, u.copy()))
    except VolumeNotSaturable as err:
        say(f"solver failure: {err}")
        state.append("exit", str(EXIT_SOLVER_FAILED))
        return RunResult(EXIT_SOLVER_FAILED, out, log)
    except (SolverFailed, StepFailure, FloatingPointError) as err:
        say(f"solver failure: {err}")
        state.append("exit", str(EXIT_SOLVER_FAILED))
        return RunResult(EXIT_SOLVER_FAILED, out, log)

    # 4) extraction + verification + report (always rerun; deterministic)
    exit_code = _postprocess(cfg, domain, tau, eps_star, sweep, out,
                             threads=threads, say=say)
    state.append("exit", str(exit_code))
    return RunResult(exit_code, out, log)


def _postprocess(cfg, domain, tau, eps_star, sweep, out, threads, say) -> int:
    grid = domain.grid
    h = grid.h
    save_field(os.path.join(out, "fields", "phi.field"), domain.phi)
    save_field(os.path.join(out, "fields", "mask.field"), domain.omega_mask)

    oracle = None
    oracle_contour = None
    if domain.meta is not None:
        m = domain.meta
        oracle = RadialOracle(R_omega=m.omega_radius, r0=m.r0,
                              w=m.ramp_width, M=m.plateau_height,
                              gamma=domain.gamma)
        cone = radial_cone_field(oracle, grid, center=m.center)
        save_field(os.path.join(out, "fields", "oracle_cone.field"), cone)
        oracle_contour = extract_contour(cone, tau)

    max_phi = float(domain.phi.values.max())

    def analyze(item):
        p, u = item
        row: dict[str, object] = {"p": p}
        save_field(os.path.join(out, "fields", f"u_p{_p_tag(p)}.field"), u)
        exterior = extract_contour(u, tau)
        interior = (interior_contact_boundary(u, domain, 1e-3 * max_phi)
                    if max_phi > 0 else ContourSet([], []))
        with open(os.path.join(out, "contours",
                               f"exterior_p{_p_tag(p)}.csv"), "w") as f:
            write_contours(f, exterior)
        with open(os.path.join(out, "contours",
                               f"interior_p{_p_tag(p)}.csv"), "w") as f:
            write_contours(f, interior)
        mag_max = float(np.abs(u.values).max())
        row["volume"] = positive_volume_outside(u, domain, tau)
        row["lip"] = float(cell_gradient_magnitude(u).max())
        labels = classify_regions(u, domain, tau,
                                  [exterior, interior])
        sign = region_sign_check(u, domain, p, labels,
                                 tol=REGION_SIGN_FACTOR * h)
        bounds = bounds_and_constraints_check(
            u, domain, tau, eps=eps_star,
            volume_tol=max(0.05 * domain.gamma,
                           4 * h * np.sqrt(domain.gamma / np.pi
                                           + (domain.meta.omega_radius**2
                                              if domain.meta else 0.0))))
        row["sign_ok"] = sign.passed
        row["bounds_ok"] = bounds.passed
        row["checks"] = (sign, bounds)
        if mag_max > tau and not exterior.is_empty():
            try:
                scan = growth_scan(u, tau, domain, seed=cfg.seed)
                row["theta_linear"] = scan.theta_linear
                row["theta_sup"] = scan.theta_sup
                radii = np.geomspace(4 * h, 0.2 * min(grid.extent), 4)
                dens = density_ratios(exterior, u, tau, list(radii))
                with open(os.path.join(out, "scans",
                                       f"growth_p{_p_tag(p)}.csv"), "w") as f:
                    w = csv.writer(f)
                    w.writerow(["quantity", "r", "value"])
                    w.writerow(["theta_linear", "", f"{scan.theta_linear:.17g}"])
                    w.writerow(["theta_sup", "", f"{scan.theta_sup:.17g}"])
                    for r, lo, hi in dens:
                        w.writerow(["density_min", f"{r:.17g}", f"{lo:.17g}"])
                        w.writerow(["density_max", f"{r:.17g}", f"{hi:.17g}"])
            except (NoBoundary, ScanUnderpowered) as err:
                row["scan_error"] = str(err)
        if oracle_contour is not None and not exterior.is_empty():
            row["hausdorff_oracle"] = hausdorff_distance(exterior, oracle_contour)
        row["exterior"] = exterior
        row["interior"] = interior
        row["u"] = u
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(analyze, sweep))
    else:
        rows = [analyze(item) for item in sweep]

    # consecutive-p free-boundary distances and sup differences
    for a, b in zip(rows, rows[1:]):
        if not a["exterior"].is_empty() and not b["exterior"].is_empty():
            a["hausdorff_next_ext"] = hausdorff_distance(a["exterior"],
                                                         b["exterior"])
        if not a["interior"].is_empty() and not b["interior"].is_empty():
            a["hausdorff_next_int"] = hausdorff_distance(a["interior"],
                                                         b["interior"])
        a["sup_diff_next"] = float(
            np.abs(a["u"].values - b["u"].values).max())

    all_ok = all(r["sign_ok"] and r["bounds_ok"] for r in rows)
    volume_ok = True
    if cfg.eps == "auto":
        final = rows[-1]
        volume_ok = abs(final["volume"] - domain.gamma) <= 0.05 * domain.gamma
    all_ok = all_ok and volume_ok

    _write_report(cfg, domain, tau, eps_star, rows, oracle, out, all_ok)
    say(f"verification {'passed' if all_ok else 'FAILED'}; report in "
        f"{os.path.join(out, 'report')}")
    return EXIT_OK if all_ok else EXIT_VERIFY_FAILED


def _write_report(cfg, domain, tau, eps_star, rows, oracle, out, all_ok):
    per_p_path = os.path.join(out, "report", "per_p.csv")
    with open(per_p_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["p", "lip_estimate", "sup_diff_next", "hausdorff_next_ext",
                    "hausdorff_next_int", "hausdorff_oracle", "theta_linear",
                    "theta_sup", "volume", "volume_error", "sign_ok",
                    "bounds_ok"])
        for r in rows:
            w.writerow([
                f"{r['p']:g}", f"{r['lip']:.17g}",
                _fmt(r.get("sup_diff_next")), _fmt(r.get("hausdorff_next_ext")),
                _fmt(r.get("hausdorff_next_int")),
                _fmt(r.get("hausdorff_oracle")), _fmt(r.get("theta_linear")),
                _fmt(r.get("theta_sup")), f"{r['volume']:.17g}",
                f"{r['volume'] - domain.gamma:.17g}",
                int(r["sign_ok"]), int(r["bounds_ok"]),
            ])

    stages_path = os.path.join(out, "report", "stages.csv")
    ckpt = os.path.join(out, "checkpoints")
    metas = sorted(name for name in os.listdir(ckpt) if name.endswith(".meta"))
    with open(stages_path, "w", newline="") as f:
        w = csv.writer(f)
        keys = ["stage", "sigma", "delta", "eps", "p", "energy_total",
                "energy_dirichlet", "energy_obstacle", "energy_volume",
                "volume_outside", "lip_estimate", "iters", "grad_norm",
                "converged"]
        w.writerow(keys)
        for name in metas:
            with open(os.path.join(ckpt, name)) as mf:
                meta = dict(line.strip().partition("=")[::2]
                            for line in mf if line.strip())
            w.writerow([meta.get(k, "") for k in keys])

    summary = io.StringIO()
    summary.write(f"tau={tau:.17g}\n")
    summary.write(f"eps_star={eps_star:.17g}\n")
    summary.write(f"gamma={domain.gamma:.17g}\n")
    if oracle is not None:
        summary.write(f"oracle.R_star={oracle.R_star:.17g}\n")
        summary.write(f"oracle.lip={oracle.lip:.17g}\n")
        summary.write("oracle.assumption=radial symmetry ansatz\n")
        final = rows[-1]
        if "hausdorff_oracle" in final:
            summary.write(
                f"final.hausdorff_oracle={final['hausdorff_oracle']:.17g}\n")
        if not final["exterior"].is_empty():
            verts = final["exterior"].vertices()
            c = domain.meta.center
            radii = np.hypot(verts[:, 0] - c[0], verts[:, 1] - c[1])
            summary.write(f"final.boundary_radius_mean={radii.mean():.17g}\n")
    summary.write(f"final.lip={rows[-1]['lip']:.17g}\n")
    summary.write(f"final.volume={rows[-1]['volume']:.17g}\n")
    summary.write(f"all_passed={int(all_ok)}\n")
    for r in rows:
        sign, bounds = r["checks"]
        tag = f"p{_p_tag(r['p'])}"
        for block in (sign, bounds):
            for item in block.items:
                summary.write(f"{tag}.{item.name}.value={item.value:.17g}\n")
                summary.write(f"{tag}.{item.name}.passed={int(item.passed)}\n")
    with open(os.path.join(out, "report", "summary.txt"), "w") as f:
        f.write(summary.getvalue())


def _fmt(v) -> str:
    return "" if v is None else f"{v:.17g}"


def load_report(out_dir: str) -> dict[str, str]:
    """Read back the report artifacts of a completed run."""
    report_dir = os.path.join(out_dir, "report")
    out: dict[str, str] = {}
    for name in ("per_p.csv", "stages.csv", "summary.txt"):
        path = os.path.join(report_dir, name)
        if not os.path.exists(path):
            raise FileNotFoundError(f"missing report artifact {path}; "
                                    "has the run completed?")
        with open(path) as f:
            out[name] = f.read()
    return out
