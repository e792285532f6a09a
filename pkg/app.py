import asyncio
import traceback
from typing import Any, Dict

from fastapi import FastAPI
from pydantic import ValidationError

from env import DEFAULT_SEED, ENVIRONMENT, configure_logging, env
from errors import SimulationError
from harness.checks import run_all_checks
from harness.pipeline import ExperimentService
from models.config import ExperimentConfig

configure_logging()

service = ExperimentService()


def _failure(e: Exception) -> Dict[str, Any]:
    error_msg = f"{type(e).__name__}: {e}"
    print(f"❌ {error_msg}")
    response = {"success": False, "error": error_msg}
    if isinstance(e, SimulationError):
        response["context"] = {k: str(v) for k, v in e.context.items()}
        invariant = getattr(e, "invariant", None)
        if invariant:
            response["invariant"] = invariant
    else:
        response["traceback"] = traceback.format_exc()
    return response


def get_app() -> FastAPI:
    """Creates and returns FastAPI app with routes attached"""
    app = FastAPI(title="coarse-to-fine QPE simulator")

    @app.get("/health")
    async def health():
        return {"success": True, "environment": ENVIRONMENT, "config": repr(env)}

    @app.post("/solve")
    async def solve_endpoint(config: ExperimentConfig):
        print(f"\n{'='*60}")
        print(f"🎯 SOLVE {config.potential.label} k={config.k} N0={config.n0_list}")
        print(f"{'='*60}\n")
        try:
            # numerical work is blocking; keep the event loop free
            report = await asyncio.to_thread(service.run_pipeline, config)
            return {"success": True, "data": report.model_dump()}
        except (SimulationError, ValidationError, ValueError) as e:
            return _failure(e)

    @app.post("/sweep")
    async def sweep_endpoint(config: ExperimentConfig):
        print(f"\n{'='*60}")
        print(f"🎯 SWEEP {config.potential.label} k={config.k} N0={config.n0_list}")
        print(f"{'='*60}\n")
        try:
            result = await asyncio.to_thread(service.sweep_and_fit, config)
            return {
                "success": True,
                "data": result.report.model_dump(),
                "slope": result.fit.slope,
                "csv": result.csv_text,
            }
        except (SimulationError, ValidationError, ValueError) as e:
            return _failure(e)

    @app.post("/sample")
    async def sample_endpoint(config: ExperimentConfig):
        print(f"🎲 SAMPLE {config.potential.label} shots={config.shots}")
        try:
            results = await asyncio.to_thread(service.end_to_end_success_rate, config)
            return {
                "success": all(r.passed for r in results),
                "data": [r.model_dump() for r in results],
            }
        except (SimulationError, ValidationError, ValueError) as e:
            return _failure(e)

    @app.get("/check")
    async def check_endpoint(seed: int = DEFAULT_SEED):
        results = await asyncio.to_thread(run_all_checks, seed)
        failed = [r for r in results if not r.passed]
        return {
            "success": not failed,
            "checks": [{"name": r.name, "passed": r.passed, "seconds": r.seconds, "detail": r.detail}
                       for r in results],
            "first_failure": failed[0].detail if failed else None,
        }

    return app


app = get_app()
