from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional

import numpy as np
from omegaconf import DictConfig

from src.construct import ParameterSolver, SpikeAssembler
from src.core.schemas import (
    ApproxSolution,
    DiscreteSolution,
    ProfileTable,
    RunConfig,
    SpectrumReport,
    SpikeConfiguration,
    SpikeParameters,
)
from src.domain import DomainModel, GreenFunction
from src.kirchhoff import KirchhoffRouth, grid_seeds
from src.pde import CenterRefiner, LaneEmdenSolver, Mesh, MeshBuilder, SpectrumSolver
from src.profiles import ProfileEvaluator


class Centred(NamedTuple):
    params: SpikeParameters
    mesh: Mesh
    approx: ApproxSolution
    history: List[float]


class RunState:
    """
    Артефакты одного запуска, вычисляемые лениво и кэшируемые по p:
    область → Ψ_k и критическая точка → μ̄ → центры при конечном p и сетка → W → u_p → спектр.
    """

    def __init__(
        self,
        run: RunConfig,
        cfg: DictConfig,
        table_loader: Callable[[], ProfileTable],
        mesh_builder: MeshBuilder,
        base_dir: Optional[Path] = None,
    ):
        self.run = run
        self.cfg = cfg
        self._table_loader = table_loader
        self.mesh_builder = mesh_builder

        path = run.domain_path(base_dir)
        if path is None:
            self.domain = DomainModel.from_spec(run.domain, cfg)
        else:
            self.domain = DomainModel.from_file(path, cfg)
        self.green = GreenFunction(self.domain, cfg)
        self.kirchhoff = KirchhoffRouth(self.green, cfg)
        self.parameter_solver = ParameterSolver(self.green, cfg)

        self._table: Optional[ProfileTable] = None
        self._evaluator: Optional[ProfileEvaluator] = None
        self._assembler: Optional[SpikeAssembler] = None
        self._crit: Optional[SpikeConfiguration] = None
        self._params: Dict[float, SpikeParameters] = {}
        self._centred: Dict[float, Centred] = {}
        self._solvers: Dict[float, LaneEmdenSolver] = {}
        self._solutions: Dict[float, DiscreteSolution] = {}
        self._spectra: Dict[float, SpectrumReport] = {}

    def tol(self, name: str) -> float:
        return float(self.run.tolerances.get(name, self.cfg.checks[name]))

    # -------------------------------------------------------------- construction

    def table(self) -> ProfileTable:
        if self._table is None:
            self._table = self._table_loader()
        return self._table

    def evaluator(self) -> ProfileEvaluator:
        if self._evaluator is None:
            self._evaluator = ProfileEvaluator(self.table())
        return self._evaluator

    def crit(self) -> SpikeConfiguration:
        if self._crit is None:
            if self.run.seeds:
                seeds = [np.asarray(s, dtype=float) for s in self.run.seeds]
            else:
                seeds = grid_seeds(self.kirchhoff, self.run.k, self.cfg)
            self._crit = self.kirchhoff.find_critical(self.run.k, seeds)
        return self._crit

    def params(self, p: float) -> SpikeParameters:
        if p not in self._params:
            self._params[p] = self.parameter_solver.solve_F(self.table(), self.crit().points, p)
        return self._params[p]

    def assembler(self) -> SpikeAssembler:
        if self._assembler is None:
            self._assembler = SpikeAssembler(self.green, self.evaluator(), self.cfg)
        return self._assembler

    def centred(self, p: float) -> Centred:
        """Центры спайков при конечном p, сетка с розетками в них и W_{α,p} на этой сетке."""
        if p not in self._centred:
            refiner = CenterRefiner(self.mesh_builder, self.parameter_solver, self.assembler(), self.cfg)
            self._centred[p] = Centred(
                *refiner.refine(self.domain, self.table(), self.crit().points, p, self.run.resolution)
            )
        return self._centred[p]

    def mesh(self, p: float) -> Mesh:
        return self.centred(p).mesh

    def approx(self, p: float) -> ApproxSolution:
        """W_{α,p} в центрах для p на собственной сетке p."""
        return self.centred(p).approx

    # -------------------------------------------------------------- pde

    def solver(self, p: float) -> LaneEmdenSolver:
        if p not in self._solvers:
            self._solvers[p] = LaneEmdenSolver(self.mesh(p), self.cfg)
        return self._solvers[p]

    def solution(self, p: float) -> DiscreteSolution:
        if p not in self._solutions:
            centred = self.centred(p)

            def init_factory(q: float) -> ApproxSolution:
                # продолжение по p: центры и сетка от целевого p
                params = self.parameter_solver.solve_F(self.table(), centred.params.xi, q)
                return self.assembler().assemble(params, centred.mesh.nodes, centred.mesh.boundary)

            self._solutions[p] = self.solver(p).solve(p, centred.approx, init_factory=init_factory)
        return self._solutions[p]

    def spectrum(self, p: float) -> SpectrumReport:
        if p not in self._spectra:
            solver = SpectrumSolver(self.solver(p).space, self.cfg)
            self._spectra[p] = solver.eigen_spectrum(self.solution(p), 3 * self.run.k + 2)
        return self._spectra[p]

    @property
    def solutions(self) -> Dict[float, DiscreteSolution]:
        return dict(self._solutions)

    @property
    def spectra(self) -> Dict[float, SpectrumReport]:
        return dict(self._spectra)
