"""HTTP facade over the experiment pipeline.

The service runs on the same filesystem as its callers: requests carry
paths, responses carry exit codes and log lines, and all heavy artifacts
stay on disk in the run's output directory.
"""

from __future__ import annotations

import os

from fastapi import FastAPI
from pydantic import BaseModel, Field

from .experiment import (EXIT_CONFIG_ERROR, EXIT_OK, load_report,
                         run_experiment)
from .grids import build_grid, save_field
from .verify import OracleLeak, RadialOracle, radial_cone_field


class RunRequest(BaseModel):
    config: str = Field(description="path to the experiment config file")
    threads: int = Field(default=1, ge=1)
    quiet: bool = False


class ResumeRequest(BaseModel):
    directory: str = Field(description="output directory of a partial run")
    threads: int = Field(default=1, ge=1)
    quiet: bool = False


class ReportRequest(BaseModel):
    directory: str


class OracleRequest(BaseModel):
    omega_radius: float = Field(gt=0)
    r0: float = Field(gt=0)
    ramp_width: float = Field(gt=0)
    height: float = Field(gt=0)
    gamma: float = Field(gt=0)
    h: float | None = Field(default=None, gt=0)
    bbox: tuple[float, float, float, float] | None = None
    out: str | None = Field(default=None,
                            description="write the sampled cone field here")


class RunResponse(BaseModel):
    exit_code: int
    out_dir: str
    messages: list[str]


class ReportResponse(BaseModel):
    exit_code: int
    tables: dict[str, str]
    messages: list[str]


class OracleResponse(BaseModel):
    exit_code: int
    R_star: float | None = None
    lip: float | None = None
    field_path: str | None = None
    messages: list[str]


app = FastAPI(title="insulab", description=__doc__)


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/runs")
def runs(req: RunRequest) -> RunResponse:
    result = run_experiment(req.config, threads=req.threads, quiet=req.quiet)
    return RunResponse(exit_code=result.exit_code, out_dir=result.out_dir,
                       messages=result.messages)


@app.post("/resume")
def resume(req: ResumeRequest) -> RunResponse:
    result = run_experiment(None, resume_dir=req.directory,
                            threads=req.threads, quiet=req.quiet)
    return RunResponse(exit_code=result.exit_code, out_dir=result.out_dir,
                       messages=result.messages)


@app.post("/report")
def report(req: ReportRequest) -> ReportResponse:
    try:
        tables = load_report(req.directory)
    except FileNotFoundError as err:
        return ReportResponse(exit_code=EXIT_CONFIG_ERROR, tables={},
                              messages=[str(err)])
    return ReportResponse(exit_code=EXIT_OK, tables=tables, messages=[])


@app.post("/oracle")
def oracle(req: OracleRequest) -> OracleResponse:
    try:
        orc = RadialOracle(R_omega=req.omega_radius, r0=req.r0,
                           w=req.ramp_width, M=req.height, gamma=req.gamma)
    except ValueError as err:
        return OracleResponse(exit_code=EXIT_CONFIG_ERROR, messages=[str(err)])
    messages = [f"R_star={orc.R_star:.17g}", f"lip={orc.lip:.17g}"]
    field_path = None
    if req.out is not None:
        try:
            pad = orc.R_star + 0.1
            bbox = req.bbox if req.bbox is not None else (-pad, pad, -pad, pad)
            h = req.h if req.h is not None else (bbox[1] - bbox[0]) / 128.0
            grid = build_grid(bbox, h)
            center = ((bbox[0] + bbox[1]) / 2.0, (bbox[2] + bbox[3]) / 2.0)
            cone = radial_cone_field(orc, grid, center=center)
            os.makedirs(os.path.dirname(os.path.abspath(req.out)), exist_ok=True)
            save_field(req.out, cone)
            field_path = req.out
        except (OracleLeak, ValueError, OSError) as err:
            return OracleResponse(exit_code=EXIT_CONFIG_ERROR,
                                  R_star=orc.R_star, lip=orc.lip,
                                  messages=messages + [str(err)])
    return OracleResponse(exit_code=EXIT_OK, R_star=orc.R_star, lip=orc.lip,
                          field_path=field_path, messages=messages)
