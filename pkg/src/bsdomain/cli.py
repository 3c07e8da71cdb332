"""Command-line interface.

Usage::

    bsd <command> [--config FILE] [--key value ...]

Commands: mesh-info, solve, solve-general, verify, probe-kernel, convergence.
The config file is flat ``key = value`` text; ``--key value`` pairs override
it. Exit codes: 0 ok, 2 mesh errors, 3 admissibility, 4 numerics.
"""

import argparse
import logging
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import meshes
from .biot_savart import VolumeField
from .divcurl import probe_points, residuals, solve_general, solve_tangential
from .errors import BsdError, FluxViolation, NumericsError
from .export import read_points_csv, write_field_csv, write_json, write_vtk
from .geometry import build_domain, build_surface, component_genus, load_surface
from .kernel_probe import probe_decay, ring_vorticity, vortex_ring
from .layer_potentials import TOL_FLUX, TOL_PANEL

log = logging.getLogger("bsdomain")

COMMANDS = ("mesh-info", "solve", "solve-general", "verify", "probe-kernel", "convergence")
TOL_RESIDUAL = 0.05


def parse_config_text(text):
    cfg = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {n}: expected key = value")
        k, v = line.split("=", 1)
        cfg[k.strip().replace("-", "_")] = v.strip()
    return cfg


def _floats(s, n=None):
    vals = [float(x) for x in str(s).replace(";", ",").split(",") if x.strip()]
    if n is not None and len(vals) != n:
        raise ValueError(f"expected {n} numbers, got {s!r}")
    return vals


def _bool(s):
    return str(s).strip().lower() in ("1", "true", "yes", "on")


@dataclass
class RunConfig:
    mesh_path: str = "builtin:icosphere:3"
    voxel_h: float = 0.05
    vorticity: str = "constant:0,0,1"
    probe_points: str = "random:200"
    output_dir: str = "bsd_out"
    tol_flux: float = TOL_FLUX
    tol_panel: float = TOL_PANEL
    tol_compat: float = 2e-2
    tol_residual: float = TOL_RESIDUAL
    vtk: bool = False
    check_residuals: bool = True
    f_src: float = 0.0
    g_bc: float = 0.0
    probe_center: str = "0,0,0"
    probe_eps: float = 0.08
    probe_direction: str = "1,0,0"
    probe_distances: str = "0.3:0.78:7"
    meshes: str = ""
    levels: int = 3
    torus_mesh: str = "builtin:torus"
    torus_h: float = 0.05
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, cfg):
        cfg = dict(cfg)
        if "mesh" in cfg and "mesh_path" not in cfg:
            cfg["mesh_path"] = cfg.pop("mesh")
        kw = {}
        extra = {}
        for k, v in cfg.items():
            if k not in cls.__dataclass_fields__ or k == "extra":
                extra[k] = v
                continue
            default = cls.__dataclass_fields__[k].default
            if isinstance(default, bool):
                kw[k] = _bool(v)
            elif isinstance(default, int):
                kw[k] = int(v)
            elif isinstance(default, float):
                kw[k] = float(v)
            else:
                kw[k] = str(v)
        out = cls(**kw, extra=extra)
        out.validate()
        return out

    def validate(self):
        if not self.voxel_h > 0:
            raise ValueError("voxel_h must be positive")
        kind = self.vorticity.split(":", 1)[0]
        if kind == "constant":
            _floats(self.vorticity.split(":", 1)[1], 3)
        elif kind == "vortex_ring":
            parts = self.vorticity.split(":")
            if len(parts) != 3:
                raise ValueError("vortex_ring needs center and radius: vortex_ring:cx,cy,cz:eps")
            _floats(parts[1], 3)
            float(parts[2])
        elif kind not in ("zero", "radial", "file"):
            raise ValueError(f"unknown vorticity {self.vorticity!r}")


def load_mesh_spec(spec):
    """``builtin:icosphere[:level[:radius]]``, ``builtin:torus[:R:r:n_around:n_tube]``,
    ``builtin:shell[:level]``, ``builtin:double_torus`` or an OFF/OBJ path."""
    if not spec.startswith("builtin:"):
        return load_surface(spec)
    parts = spec.split(":")[1:]
    name, args = parts[0], parts[1:]
    if name == "icosphere":
        level = int(args[0]) if args else 3
        radius = float(args[1]) if len(args) > 1 else 1.0
        return build_surface(*meshes.icosphere(level, radius))
    if name == "torus":
        vals = [float(a) for a in args]
        kw = dict(zip(("r_major", "r_minor"), vals[:2]))
        kw.update({k: int(v) for k, v in zip(("n_around", "n_tube"), vals[2:4])})
        return build_surface(*meshes.torus(**kw))
    if name == "shell":
        return build_surface(*meshes.concentric_shell(int(args[0]) if args else 2))
    if name == "double_torus":
        return build_surface(*meshes.double_torus_block())
    raise ValueError(f"unknown builtin mesh {spec!r}")


def make_vorticity(cfg, model):
    kind, _, rest = cfg.vorticity.partition(":")
    if kind == "zero":
        return VolumeField.zeros(model.volume)
    if kind == "constant":
        return VolumeField.constant(model.volume, _floats(rest, 3))
    if kind == "radial":
        def radial(p):
            p = np.atleast_2d(p)
            return p / np.linalg.norm(p, axis=1)[:, None] ** 3
        return VolumeField.from_function(model.volume, radial)
    if kind == "vortex_ring":
        c, eps = rest.split(":")
        return vortex_ring(_floats(c, 3), float(eps), model)
    if kind == "file":
        # CSV rows x, y, z, wx, wy, wz; nearest sample for each node
        from scipy.spatial import cKDTree
        data = read_points_csv(rest)
        if data.ndim != 2 or data.shape[1] < 6:
            raise ValueError(f"{rest}: expected columns x,y,z,wx,wy,wz")
        _, idx = cKDTree(data[:, :3]).query(model.volume.nodes)
        return VolumeField(model.volume, data[idx, 3:6])
    raise ValueError(f"unknown vorticity {cfg.vorticity!r}")


def make_points(cfg, model):
    spec = cfg.probe_points
    kind, _, rest = spec.partition(":")
    if kind == "random":
        return probe_points(model, int(rest or 200))
    if kind == "line":
        a, b, n = rest.split(":")
        t = np.linspace(0.0, 1.0, int(n))[:, None]
        return np.asarray(_floats(a, 3)) * (1 - t) + np.asarray(_floats(b, 3)) * t
    if kind == "grid":
        n = int(rest or 10)
        s = model.surface
        axes = [np.linspace(lo, hi, n) for lo, hi in zip(s.vertices.min(0), s.vertices.max(0))]
        g = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 3)
        return g[model.signed_distance(g) < -0.5 * model.h]
    if os.path.exists(spec):
        return read_points_csv(spec)[:, :3]
    raise ValueError(f"unknown probe point spec {spec!r}")


def analytic_solution(cfg):
    """Exact velocity for constant vorticity on a unit ball mesh, else None."""
    kind, _, rest = cfg.vorticity.partition(":")
    if not cfg.mesh_path.startswith("builtin:icosphere"):
        return None
    parts = cfg.mesh_path.split(":")
    if len(parts) > 3 and float(parts[3]) != 1.0:
        return None
    if kind == "constant":
        w = np.asarray(_floats(rest, 3))
        return lambda p: np.cross(w, np.atleast_2d(p)) / 2.0
    if kind == "zero":
        return lambda p: np.zeros((len(np.atleast_2d(p)), 3))
    return None


def _model(cfg, mesh=None, h=None):
    surf = load_mesh_spec(mesh or cfg.mesh_path)
    return build_domain(surf, h or cfg.voxel_h)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_mesh_info(cfg):
    surf = load_mesh_spec(cfg.mesh_path)
    genus = component_genus(surf)
    print(f"components: {surf.n_components}, genus: {genus}, harmonic_dim: {sum(genus)}")
    print(f"panels: {surf.n_panels}")
    print(f"area: {surf.total_area:.10g}")
    print(f"volume: {surf.volume:.10g}")
    print(f"closure residual: {surf.closure_residuals().max():.3e}")
    print(f"cavities: {len(surf.cavity_components())}")
    return 0


def _write_outputs(cfg, pts, vals, diag):
    os.makedirs(cfg.output_dir, exist_ok=True)
    write_field_csv(os.path.join(cfg.output_dir, "u.csv"), pts, vals)
    if cfg.vtk:
        write_vtk(os.path.join(cfg.output_dir, "u.vtk"), pts, vals)
    write_json(os.path.join(cfg.output_dir, "diagnostics.json"), diag)


def _finish(cfg, model, evaluator, omega, diag, pts, vals):
    if cfg.check_residuals:
        rep = residuals(model, evaluator, omega)
        diag["residuals"] = rep
        bad = {k: rep[k] for k in ("curl_max", "div_max", "tangency_max") if rep[k] > cfg.tol_residual}
    else:
        bad = {}
    _write_outputs(cfg, pts, vals, diag)
    for k in ("curl_max", "div_max", "tangency_max"):
        if "residuals" in diag:
            print(f"{k}: {diag['residuals'][k]:.4g}")
    if bad:
        print(f"residuals above tolerance {cfg.tol_residual:g}: {bad}", file=sys.stderr)
        return NumericsError.exit_code
    return 0


def cmd_solve(cfg):
    model = _model(cfg)
    omega = make_vorticity(cfg, model)
    u = solve_tangential(model, omega, tol_flux=cfg.tol_flux)
    pts = make_points(cfg, model)
    vals = u(pts)
    diag = dict(command="solve", mesh=cfg.mesh_path, voxel_h=cfg.voxel_h, vorticity=cfg.vorticity,
                n_panels=model.surface.n_panels, n_nodes=model.volume.n_nodes, **u.diagnostics)
    print(f"solved on {model.surface.n_panels} panels, {model.volume.n_nodes} nodes; "
          f"{len(pts)} points written to {cfg.output_dir}")
    return _finish(cfg, model, u, omega, diag, pts, vals)


def cmd_solve_general(cfg):
    model = _model(cfg)
    omega = make_vorticity(cfg, model)
    v = solve_general(model, omega, cfg.f_src, cfg.g_bc, tol_flux=cfg.tol_flux,
                      tol_compat=cfg.tol_compat)
    pts = make_points(cfg, model)
    vals = v(pts)
    diag = dict(command="solve-general", mesh=cfg.mesh_path, voxel_h=cfg.voxel_h,
                vorticity=cfg.vorticity, f_src=cfg.f_src, g_bc=cfg.g_bc, **v.diagnostics)
    _write_outputs(cfg, pts, vals, diag)
    print(f"solved general div-curl system; {len(pts)} points written to {cfg.output_dir}")
    return 0


def cmd_verify(cfg):
    from .verify import ball_suite, biot_savart_suite, torus_suite
    ball = _model(cfg)
    torus = _model(cfg, cfg.torus_mesh, cfg.torus_h)
    results = []
    results += [("ball-constant/" + n, ok, d) for n, ok, d in ball_suite(ball)]
    results += [("ball-F=y/" + n, ok, d) for n, ok, d in biot_savart_suite(ball)]
    results += [("torus-harmonic/" + n, ok, d) for n, ok, d in torus_suite(torus)]
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def cmd_probe_kernel(cfg):
    model = _model(cfg)
    y = np.asarray(_floats(cfg.probe_center, 3))
    direction = np.asarray(_floats(cfg.probe_direction, 3))
    direction /= np.linalg.norm(direction)
    a, b, n = cfg.probe_distances.split(":")
    d = np.linspace(float(a), float(b), int(n))
    rep = probe_decay(model, y, cfg.probe_eps, y + d[:, None] * direction)
    os.makedirs(cfg.output_dir, exist_ok=True)
    rep.to_csv(os.path.join(cfg.output_dir, "probe.csv"))
    print(f"fitted_slope: {rep.fitted_slope:.4f}")
    print(f"ell_y: {rep.ell_y:.6g}")
    print(f"max response*d^2/ell: {rep.scaled.max():.6g}")
    return 0


def cmd_convergence(cfg):
    mesh_list = [m.strip() for m in cfg.meshes.split(",") if m.strip()]
    levels = cfg.levels
    if len(mesh_list) < levels:
        warnings.warn("no matched finer meshes; refining the voxel size only", stacklevel=2)
        mesh_list = mesh_list + [mesh_list[-1] if mesh_list else cfg.mesh_path] * (levels - len(mesh_list))
    exact = analytic_solution(cfg)
    hs = [cfg.voxel_h / 2 ** k for k in range(levels)]
    models = [_model(cfg, m, h) for m, h in zip(mesh_list, hs)]
    # margin of 4 finest spacings, but never closer than one coarse spacing
    pts = probe_points(models[0], 200, margin_factor=max(4.0 * hs[-1] / hs[0], 1.0))
    sols = []
    for m in models:
        u = solve_tangential(m, make_vorticity(cfg, m), tol_flux=cfg.tol_flux)
        sols.append(u(pts))
    if exact is not None:
        ref = exact(pts)
        errs = [np.linalg.norm(s - ref) / max(np.linalg.norm(ref), 1e-300) for s in sols]
        label = "L2 error vs analytic"
    else:
        ref = sols[-1]
        errs = [np.linalg.norm(s - ref) / max(np.linalg.norm(ref), 1e-300) for s in sols[:-1]]
        label = "L2 difference to finest"
    print(f"{'h':>10} {'panels':>8} {label:>24} {'order':>8}")
    for k, e in enumerate(errs):
        order = np.log2(errs[k - 1] / e) if k > 0 and e > 0 else float("nan")
        print(f"{hs[k]:10.4g} {models[k].surface.n_panels:8d} {e:24.6e} {order:8.3f}")
    return 0


HANDLERS = {
    "mesh-info": cmd_mesh_info,
    "solve": cmd_solve,
    "solve-general": cmd_solve_general,
    "verify": cmd_verify,
    "probe-kernel": cmd_probe_kernel,
    "convergence": cmd_convergence,
}


def _overrides(tokens):
    out = {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--"):
            raise ValueError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
        else:
            try:
                val = next(it)
            except StopIteration:
                raise ValueError(f"missing value for {tok}") from None
        out[key.replace("-", "_")] = val
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(prog="bsd", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key = value file")
    parser.add_argument("-v", "--verbose", action="store_true")
    args, rest = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg_map = {}
        if args.config:
            with open(args.config) as fh:
                cfg_map.update(parse_config_text(fh.read()))
        cfg_map.update(_overrides(rest))
        cfg = RunConfig.from_mapping(cfg_map)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return HANDLERS[args.command](cfg)
    except FluxViolation as exc:
        print("error: vorticity flux does not vanish on every boundary component", file=sys.stderr)
        if exc.fluxes is not None:
            labels = exc.labels or [str(j) for j in range(len(exc.fluxes))]
            for lab, val in zip(labels, exc.fluxes):
                print(f"flux[component {lab}] = {val:.10g}")
        return exc.exit_code
    except BsdError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
