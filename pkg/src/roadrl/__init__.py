"""Driving simulator for training actor-critic agents on road networks."""

from .ddpg import (
    DdpgAgent,
    ExplorationState,
    ReplayBuffer,
    load_model,
    reward_speed_limit,
    save_model,
)
from .dynamics import (
    MotionState,
    PathFrame,
    PhysConstants,
    SensorReading,
    VehicleProps,
    read_sensors,
    step_motion,
    velocity,
)
from .geo import GeoPoint, haversine_gcd
from .graph import (
    Curve,
    RoadEdge,
    RoadGraph,
    assign_speed_limits,
    enhance,
    largest_wcc,
    load_network,
    save_network,
)
from .netgen import NetGenSpec, delaunay, generate
from .osm import ImportReport, classify_way, import_osm, parse_osm_xml
from .routing import Path, PathMode, dijkstra
from .sim import RunConfig, StatRings, VehicleSettings, World, place_vehicles

__version__ = "0.1.0"
