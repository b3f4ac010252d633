"""Discrete-event polarization simulator for a fiber loop-and-switch memory.

A heralded photon enters through a circulator, a Pockels-cell switch folds it
into a fiber delay loop for N round trips, and the same switch releases it.
The package models the polarization transformation and loss of every passage,
synthesizes coincidence-count data, and provides the reconstruction and fit
tools used to characterize such a memory.
"""

from .components import (
    CIRCULATOR_ARM, COUPLER, FIBER_SEGMENT, FORWARD, FPC, MIRROR, OFF, ON, PBS,
    POCKELS_CELL, RETROREFLECTOR, REVERSE, ComponentSpec, DriveSchedule,
    circulator_operator, fiber_transmission, pbs_route, pockels_level,
    pockels_operator,
)
from .counting import (
    CountRecord, DecayScan, MalusScan, ScanDataset, TomographyScan,
    expected_rate, malus_mean, read_csv, read_json, run_scan, sample_counts,
    synth_malus_dataset, write_csv, write_json,
)
from .engine import (
    ExitEvent, MemoryConfig, PathTrace, StorageOutcome, TransmissionParams,
    derive_transmission_params, efficiency, f8_path_trace, simulate_storage,
    switch_schedule,
)
from .errors import (
    GainError, IncompleteSetError, InvalidStateError, LoopMemError,
    NoSignalError, SchemaError, UnschedulableError,
)
from .fitting import (
    BudgetReport, DecayFit, MalusFit, default_attenuation_db_per_km, fit_decay,
    fit_malus, lifetime_1e, project_budget, route_inventory,
)
from .polarization import (
    A, D, DensityMatrix, H, JonesOperator, L, PureState, R, V, apply,
    attenuator, birefringent_phase, fidelity, half_waveplate, identity,
    jones_element, make_pure, pauli_x, quarter_waveplate, rotator,
)
from .scenario import PRESETS, Scenario, load_scenario, preset_scenario, resolve, run
from .tomography import (
    MeasurementSet, ReconstructionResult, counts_from_dataset, linear_inversion,
    mle_reconstruct, monte_carlo_uncertainty, reconstruct_with_uncertainty,
)

__version__ = "0.1.0"
