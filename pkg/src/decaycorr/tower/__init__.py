"""Young towers: induced towers of circle maps and synthetic towers with prescribed tails."""
from .diameters import (
    DiscretizedObservable,
    DistortionReport,
    delta_bar,
    delta_bar_sequence,
    delta_n,
    discretize_observable,
    distortion_check,
    interval_inf,
)
from .io import read_tower, write_tower
from .laws import ExpTail, PolyTail, StretchedTail, law_from_dict, law_to_dict
from .model import (
    TowerModel,
    TowerState,
    build_induced_tower,
    invariant_levels,
    project,
    prefix_stopping_times,
    return_map,
    sample_states,
    semiconjugacy_defect,
    stopping_times,
    synth_tower,
    tower_step,
)
from .orbits import TowerPath, induced_path, induced_paths, synthetic_path
from .partitions import (
    PartitionElement,
    cylinder_interval,
    image_interval,
    refine_partition,
    separation_time,
)
