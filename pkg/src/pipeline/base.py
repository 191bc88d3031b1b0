from datetime import datetime
from logging import Logger
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from src.core.exceptions import SpikeCoreError
from src.core.schemas import CheckRow, StageResult

StageBody = Callable[[], Tuple[List[CheckRow], Dict[str, Any]]]


def compare(
    name: str,
    predicted: float,
    computed: float,
    tolerance: float,
    relative: bool = False,
    gating: bool = True,
    note: Optional[str] = None,
) -> CheckRow:
    """Строка отчета: |computed − predicted| (или относительная разность) против допуска."""
    gap = abs(computed - predicted)
    if relative:
        gap /= max(abs(predicted), 1e-300)
    return CheckRow(
        name=name,
        predicted=float(predicted),
        computed=float(computed),
        tolerance=float(tolerance),
        passed=bool(np.isfinite(gap) and gap <= tolerance),
        gating=gating,
        note=note,
    )


def flag(name: str, passed: bool, gating: bool = True, note: Optional[str] = None) -> CheckRow:
    return CheckRow(name=name, passed=bool(passed), gating=gating, note=note)


def run_stage(logger: Logger, name: str, body: StageBody) -> StageResult:
    """
    Выполняет стадию. Ошибки тулкита попадают в статус стадии, а не наружу:
    остальные стадии продолжают работу.
    """
    start_time = datetime.now()
    try:
        rows, data = body()
        result = StageResult(name=name, rows=rows, data=data)
    except SpikeCoreError as e:
        logger.exception(f"Stage {name} failed")
        result = StageResult(
            name=name,
            status="error",
            description_error=f"{e.__class__.__name__}: {e}",
        )
    end_time = datetime.now()
    failed = [r.name for r in result.rows if r.gating and not r.passed]
    logger.info(
        f"Stage {name} completed. Status: {result.status}. "
        f"Failed rows: {failed or 'none'}. "
        f"Duration: {(end_time - start_time).total_seconds():.2f}s"
    )
    return result
