"""End-to-end experiment protocol: simulate, add noise, scan, invert, export.

Every stage persists its outputs as field containers tagged with the
config hash, so a run can resume from any completed stage and mixed-up
inputs are rejected.  All numeric stages are deterministic for a fixed
config and seed; wall-clock timings never enter reports or manifests.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from . import containers, datapipe, forward
from .config import ExperimentConfig
from .containers import Container, read_container, write_container
from .convexify import ConvexifyProblem, minimize_J
from .errors import ConfigurationError
from .grids import ComplexVolume, MultiKVolume, build_dielectric
from .reconstruct import assemble_v, evaluate_against_truth, recover_c
from .tail import TailProblem, minimize_tail

log = logging.getLogger(__name__)

__all__ = ["run_simulate", "run_noise", "run_scan", "run_invert", "run_export", "run_pipeline"]


def _axis_meta(config: ExperimentConfig, names) -> dict:
    spec, kgrid = config.domain, config.wavenumbers
    table = {
        "x": [float(v) for v in spec.x_nodes()],
        "y": [float(v) for v in spec.y_nodes()],
        "z": [float(v) for v in spec.z_nodes()],
        "k": [float(v) for v in kgrid.nodes()],
    }
    return {name: table[name] for name in names}


def _volume_meta(config: ExperimentConfig, names) -> dict:
    spec = config.domain
    return {
        "axis_coords": _axis_meta(config, names),
        "origin": [-spec.half_width, -spec.half_width, spec.z_front],
        "spacing": [spec.h, spec.h, spec.hz],
    }


def _check_hash(container: Container, config: ExperimentConfig, force: bool) -> None:
    if container.config_hash != config.config_hash() and not force:
        raise ConfigurationError(
            f"container {container.path} was produced by config {container.config_hash}, "
            f"current config is {config.config_hash()} (use force to override)"
        )


def _fresh(path: Path, config: ExperimentConfig, resume: bool) -> Container | None:
    """Return the persisted artifact if resuming and it matches the config."""
    if resume and (path / "manifest.json").exists():
        art = read_container(path)
        if art.config_hash == config.config_hash():
            log.info("resume: reusing %s", path)
            return art
    return None


def run_simulate(config: ExperimentConfig, outdir: str | Path, resume: bool = False) -> Path:
    """Solve the forward problem per wavenumber; write the measured stack."""
    outdir = Path(outdir)
    target = outdir / "f"
    if _fresh(target, config, resume) is not None:
        return target
    spec, kgrid = config.domain, config.wavenumbers
    c = build_dielectric(config.inclusions, spec)
    pts, shape = forward.plane_lattice(spec, spec.meas_z)
    f = np.empty((spec.nx, spec.ny, kgrid.nk), dtype=np.complex128)
    solve_info = []
    for n, k in enumerate(kgrid.nodes()):
        sol = forward.solve_scatterer(c, float(k), config.forward)
        if sol is None:
            f[..., n] = np.exp(1j * k * spec.meas_z)
            solve_info.append({"k": float(k), "residual": 0.0, "iterations": 0})
        else:
            scat = forward.scattered_from_sources(pts, sol.src_points, sol.src_values, float(k), sol.spacing**3)
            f[..., n] = scat.reshape(shape) + np.exp(1j * k * spec.meas_z)
            solve_info.append(
                {"k": float(k), "residual": sol.report.residual, "iterations": sol.report.iterations}
            )
            log.info("simulate k=%.2f: %d matvecs, residual %.2e, %.1fs",
                     k, sol.report.iterations, sol.report.residual, sol.report.wall_time)
    meta = {"axis_coords": _axis_meta(config, ["x", "y", "k"]), "plane_z": spec.meas_z, "forward": solve_info}
    write_container(target, "f", f, ["x", "y", "k"], config.config_hash(), meta)
    return target


def run_noise(config: ExperimentConfig, outdir: str | Path, data: str | Path | None = None,
              resume: bool = False, force: bool = False) -> Path:
    outdir = Path(outdir)
    target = outdir / "f_noisy"
    if _fresh(target, config, resume) is not None:
        return target
    source = read_container(Path(data) if data else outdir / "f")
    _check_hash(source, config, force)
    noisy = datapipe.add_noise_stack(source.values, config.noise)
    meta = dict(source.manifest["meta"])
    meta["noise"] = {"delta": config.noise.delta, "seed": config.noise.seed}
    write_container(target, "f_noisy", noisy, ["x", "y", "k"], config.config_hash(), meta)
    return target


def run_scan(config: ExperimentConfig, outdir: str | Path, data: str | Path | None = None,
             out_file: str | Path | None = None, force: bool = False) -> tuple[Path, float]:
    """Depth scan M(a) of the top-wavenumber slice; CSV plus chosen depth."""
    outdir = Path(outdir)
    source = read_container(Path(data) if data else outdir / "f")
    _check_hash(source, config, force)
    spec, kgrid = config.domain, config.wavenumbers
    plane = datapipe.PlaneField(source.values[..., -1], spec.meas_z, kgrid.k_max, spec)
    a_values, curve, a_best = datapipe.scan_depth(
        plane, (config.scan.a_min, config.scan.a_max), config.scan.n_samples
    )
    out_file = Path(out_file) if out_file else outdir / "scan.csv"
    out_file.parent.mkdir(parents=True, exist_ok=True)
    with open(out_file, "w") as fh:
        fh.write(f"# argmax_a = {a_best:.17g}\n")
        fh.write("a,M\n")
        for a, m in zip(a_values, curve):
            fh.write(f"{a:.17g},{m:.17g}\n")
    return out_file, a_best


def _write_trace(path: Path, trace) -> None:
    path.write_text(json.dumps(trace.as_dict(), sort_keys=True))


def _read_trace(path: Path) -> dict:
    return json.loads(path.read_text())


def run_invert(config: ExperimentConfig, outdir: str | Path, data: str | Path | None = None,
               resume: bool = False, force: bool = False) -> dict:
    """Full inversion: boundary data, tail solve, convexification, contrast.

    Persists every intermediate; aborts carry the failing stage name while
    earlier artifacts stay on disk.
    """
    outdir = Path(outdir)
    spec, kgrid = config.domain, config.wavenumbers
    chash = config.config_hash()
    if data is None:
        data = outdir / "f_noisy"
        if not (Path(data) / "manifest.json").exists():
            data = outdir / "f"
    source = read_container(Path(data))
    _check_hash(source, config, force)

    stage = "propagate"
    try:
        g0_art = _fresh(outdir / "g0", config, resume)
        g1_art = _fresh(outdir / "g1", config, resume)
        if g0_art is None or g1_art is None:
            g0, g1 = datapipe.extract_boundary_data(source.values, kgrid, spec, config.epsilon)
            meta = {"axis_coords": _axis_meta(config, ["x", "y", "k"]), "plane_z": spec.z_front}
            write_container(outdir / "g0", "g0", g0, ["x", "y", "k"], chash, meta)
            write_container(outdir / "g1", "g1", g1, ["x", "y", "k"], chash, meta)
        else:
            g0, g1 = g0_art.values, g1_art.values

        stage = "boundary-data"
        arts = [_fresh(outdir / name, config, resume) for name in ("phi0", "phi1", "psi0", "psi1")]
        if any(a is None for a in arts):
            bd = datapipe.log_and_differentiate(g0, g1, kgrid, spec.front_xi)
            meta_k = {"axis_coords": _axis_meta(config, ["x", "y", "k"])}
            meta_p = {"axis_coords": _axis_meta(config, ["x", "y"])}
            write_container(outdir / "phi0", "phi0", bd.phi0, ["x", "y", "k"], chash, meta_k)
            write_container(outdir / "phi1", "phi1", bd.phi1, ["x", "y", "k"], chash, meta_k)
            write_container(outdir / "psi0", "psi0", bd.psi0, ["x", "y"], chash, meta_p)
            write_container(outdir / "psi1", "psi1", bd.psi1, ["x", "y"], chash, meta_p)
            phi0, phi1, psi0, psi1 = bd.phi0, bd.phi1, bd.psi0, bd.psi1
        else:
            phi0, phi1, psi0, psi1 = (a.values for a in arts)

        stage = "tail"
        v_art = _fresh(outdir / "V", config, resume)
        if v_art is None or not (outdir / "tail_trace.json").exists():
            problem = TailProblem(psi0, psi1, config.mu, config.alpha, spec)
            V, tail_trace = minimize_tail(problem, config.cg)
            write_container(outdir / "V", "V", V.values, ["x", "y", "z"], chash, _volume_meta(config, ["x", "y", "z"]))
            _write_trace(outdir / "tail_trace.json", tail_trace)
            log.info("tail solve: %d iterations, final value %.3e",
                     len(tail_trace.values), tail_trace.values[-1] if tail_trace.values else float("nan"))
        else:
            V = ComplexVolume(v_art.values, spec)
        tail_trace_doc = _read_trace(outdir / "tail_trace.json")

        stage = "convexify"
        q_art = _fresh(outdir / "q", config, resume)
        if q_art is None or not (outdir / "q_trace.json").exists():
            problem = ConvexifyProblem(V, phi0, phi1, config.lam, kgrid, spec, config.rho)
            q, q_trace = minimize_J(problem, config.cg)
            write_container(
                outdir / "q", "q", q.values, ["x", "y", "z", "k"], chash, _volume_meta(config, ["x", "y", "z", "k"])
            )
            _write_trace(outdir / "q_trace.json", q_trace)
            log.info("convexify: %d iterations, final value %.3e",
                     len(q_trace.values), q_trace.values[-1] if q_trace.values else float("nan"))
        else:
            q = MultiKVolume(q_art.values, spec, kgrid)
        q_trace_doc = _read_trace(outdir / "q_trace.json")

        stage = "reconstruct"
        v_low = assemble_v(q, V)
        write_container(outdir / "v", "v", v_low.values, ["x", "y", "z"], chash, _volume_meta(config, ["x", "y", "z"]))
        c_rec = recover_c(v_low, kgrid.k_min, config.flip_vz_sign)
        write_container(
            outdir / "c", "c", c_rec.c.astype(np.complex128), ["x", "y", "z"], chash,
            _volume_meta(config, ["x", "y", "z"]),
        )
    except Exception:
        log.error("inversion stage %r failed; artifacts up to this stage remain in %s", stage, outdir)
        raise

    if config.inclusions:
        report = evaluate_against_truth(c_rec, list(config.inclusions))
    else:
        from .reconstruct import _argmax_location, ReconstructionReport

        c_comp, loc = _argmax_location(c_rec.c, spec)
        report = ReconstructionReport(c_comp=c_comp, location=loc)
    doc = report.as_dict()
    doc["config_hash"] = chash
    doc["traces"] = {"tail": tail_trace_doc, "convexify": q_trace_doc}
    doc["artifacts"] = ["g0", "g1", "phi0", "phi1", "psi0", "psi1", "V", "q", "v", "c"]
    (outdir / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True))
    return doc


def run_export(container_path: str | Path, fmt: str, out_file: str | Path, slice_spec: str | None = None) -> Path:
    art = read_container(container_path)
    if fmt == "vtk":
        return containers.export_vtk(art, out_file)
    if fmt == "csv":
        if slice_spec is None:
            raise ConfigurationError("CSV export needs a slice spec, e.g. z=0.0")
        return containers.export_csv_slice(art, slice_spec, out_file)
    raise ConfigurationError(f"unknown export format {fmt!r}")


def run_pipeline(config: ExperimentConfig, outdir: str | Path, resume: bool = False) -> dict:
    """All stages in order: simulate, noise, scan, invert, export."""
    outdir = Path(outdir)
    run_simulate(config, outdir, resume=resume)
    data = run_noise(config, outdir, resume=resume)
    run_scan(config, outdir)
    doc = run_invert(config, outdir, data=data, resume=resume)
    run_export(outdir / "c", "vtk", outdir / "c.vtk")
    return doc
