"""Concrete worlds: navigation grids, cumulative Connect-4, Othello, seating puzzles."""

from .base import World, sample_prefix_to_state
from .connect4 import Connect4World, connect4_world, fraction_of_states_with_no_full_column
from .navigation import (
    NavWorld,
    RouteOracleModel,
    StreetEdge,
    StreetGraph,
    gen_grid_city,
    gen_traversals,
    nav_world,
    split_by_endpoints,
)
from .othello import OthelloWorld, othello_world
from .seating import SeatingWorld, seating_world, task_accuracy

__all__ = [
    "World",
    "sample_prefix_to_state",
    "Connect4World",
    "connect4_world",
    "fraction_of_states_with_no_full_column",
    "NavWorld",
    "RouteOracleModel",
    "StreetEdge",
    "StreetGraph",
    "gen_grid_city",
    "gen_traversals",
    "nav_world",
    "split_by_endpoints",
    "OthelloWorld",
    "othello_world",
    "SeatingWorld",
    "seating_world",
    "task_accuracy",
]
