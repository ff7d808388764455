# environments.py
#
# MIT License
#
# Copyright (c) 2026 The offpolicy authors
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

"""
The benchmark problems: Collision, Four Rooms and High-Variance Four Rooms.
"""

import functools
import itertools
import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .config import (DEFAULT_FOURROOMS_MAP,
                     DEFAULT_GAMMA,
                     PROBLEM_COLLISION,
                     PROBLEM_FOURROOMS,
                     PROBLEM_HV_FOURROOMS,
                     PROBLEM_IDS)
from .core import FeatureVector, GvfSpec, TabularPolicy, Transition
from .utils import OffPolicyError

Cell = Tuple[int, int]

###############################################################################
# errors
###############################################################################


class EnvError(OffPolicyError):
    """Base class for environment errors"""
    pass


class InvalidStateError(EnvError):
    """Not a state of the environment"""
    pass


class IllegalActionError(EnvError):
    """The action cannot be taken in that state"""
    pass


class UnreachableHallwayError(EnvError):
    """Some free cell cannot reach the hallway"""
    pass


class MapFormatError(EnvError):
    """Malformed map file"""
    pass


class UnknownProblemError(EnvError):
    """Not a known problem id"""
    pass


###############################################################################
# Collision
###############################################################################

COLLISION_N_STATES = 8
COLLISION_START_STATES = (0, 1, 2, 3)
COLLISION_FEATURE_DIM = 6
COLLISION_ACTIVE_FEATURES = 3

C_RIGHT = 0
C_RETREAT = 1


@dataclass(frozen=True)
class CollisionFeatures:
    """
    One feature vector per Collision state, fixed for a whole run
    """
    table: Tuple[FeatureVector, ...]
    rng_seed: Optional[int] = None

    @property
    def dim(self) -> int:
        return self.table[0].dim

    def __getitem__(self, s: int) -> FeatureVector:
        return self.table[s]


def make_collision_features(rng: np.random.Generator, rng_seed: Optional[int] = None) -> CollisionFeatures:
    """
    Draw 8 distinct binary vectors of length 6 with exactly three ones,
    uniformly without replacement from the 20 possibilities.
    """
    combos = list(itertools.combinations(range(COLLISION_FEATURE_DIM), COLLISION_ACTIVE_FEATURES))
    picks = rng.choice(len(combos), size=COLLISION_N_STATES, replace=False)
    table = tuple(FeatureVector.binary(COLLISION_FEATURE_DIM, combos[int(i)]) for i in picks)
    return CollisionFeatures(table=table, rng_seed=rng_seed)


def make_tabular_features(n_states: int) -> Tuple[FeatureVector, ...]:
    return tuple(FeatureVector.one_hot(n_states, s) for s in range(n_states))


class CollisionEnv(object):
    """
    Eight states in a corridor. Moving right from the last state yields a
    reward of 1 and ends the episode; in the four rightmost states the
    behavior may retreat to one of the four leftmost ones.
    """

    n_states = COLLISION_N_STATES
    n_actions = 2
    start_states = COLLISION_START_STATES
    gamma = DEFAULT_GAMMA

    def __init__(self, features: Optional[Sequence[FeatureVector]] = None, rng_seed: int = 0):
        self.rng_seed = rng_seed
        if features is None:
            features = make_collision_features(np.random.default_rng(rng_seed), rng_seed=rng_seed).table
        self.features = tuple(features)

        self.behavior = TabularPolicy([[1.0, 0.0]] * 4 + [[0.5, 0.5]] * 4)
        self.target = TabularPolicy([[1.0, 0.0]] * COLLISION_N_STATES)

    def reset(self, rng: np.random.Generator) -> int:
        return int(self.start_states[rng.integers(len(self.start_states))])

    def check(self, state: int, action: int) -> None:
        if not 0 <= state < self.n_states:
            raise InvalidStateError(f"collision state {state}")
        if action == C_RETREAT and state < 4:
            raise IllegalActionError(f"retreat is not available in state {state}")
        if action not in (C_RIGHT, C_RETREAT):
            raise IllegalActionError(f"unknown collision action {action}")

    def outcomes(self, state: int, action: int) -> List[Tuple[float, int]]:
        """
        (probability, next state) pairs
        """
        self.check(state, action)
        if action == C_RIGHT and state < self.n_states - 1:
            return [(1.0, state + 1)]
        # termination restarts like a retreat: uniform over the start states
        p = 1.0 / len(self.start_states)
        return [(p, s) for s in self.start_states]

    def next_state(self, state: int, action: int, rng: np.random.Generator) -> int:
        self.check(state, action)
        if action == C_RIGHT and state < self.n_states - 1:
            return state + 1
        return self.reset(rng)

    def is_terminal(self, state: int, action: int) -> bool:
        return state == self.n_states - 1 and action == C_RIGHT

    def cumulant(self, s: int, a: int, s_next: int) -> float:
        return 1.0 if self.is_terminal(s, a) else 0.0

    def discount(self, s: int, a: int, s_next: int) -> float:
        return 0.0 if self.is_terminal(s, a) else self.gamma

    def step(self, state: int, action: int, rng: np.random.Generator, episode_start: bool = False) -> Transition:
        return collision_step(self, state, action, rng, episode_start=episode_start)


def collision_step(env: CollisionEnv, state: int, action: int, rng: np.random.Generator,
                   episode_start: bool = False) -> Transition:
    s_next = env.next_state(state, action, rng)
    return Transition(s=state, a=action, s_next=s_next,
                      reward=env.cumulant(state, action, s_next),
                      gamma_next=env.discount(state, action, s_next),
                      pi_prob=env.target.prob(state, action),
                      b_prob=env.behavior.prob(state, action),
                      interest=1.0,
                      x=env.features[state],
                      x_next=env.features[s_next],
                      episode_start=episode_start)


###############################################################################
# Four Rooms
###############################################################################

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
ACTION_LETTERS = "UDLR"
MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}

MAP_WALL = "#"
MAP_FREE = "."
MAP_HALLWAY = "H"
MAP_START = "S"
MAP_HV_DIGITS = "1234"
MAP_ACTIONS_PREFIX = "actions:"
MAP_COMMENT = ";"


@dataclass(frozen=True)
class FourRoomsLayout:
    height: int
    width: int
    cells: Tuple[Cell, ...]
    walls: FrozenSet[Cell]
    hallways: Tuple[int, ...]
    start: int
    hv_states: Tuple[Tuple[int, int], ...]
    rooms: Tuple[FrozenSet[int], ...]

    @property
    def n_states(self) -> int:
        return len(self.cells)

    @functools.cached_property
    def index(self) -> Dict[Cell, int]:
        return {c: i for i, c in enumerate(self.cells)}

    def state_of(self, cell: Cell) -> int:
        try:
            return self.index[tuple(cell)]
        except KeyError:
            raise InvalidStateError(f"{cell} is not a free cell")

    def room_of(self, state: int) -> Optional[int]:
        for i, room in enumerate(self.rooms):
            if state in room:
                return i
        return None

    def room_hallways(self, room: int) -> List[int]:
        """
        Hallways adjacent to a room, in state order
        """
        found = set()
        for s in self.rooms[room]:
            for a in MOVES:
                n = fourrooms_step(self, s, a)
                if n in self.hallways:
                    found.add(n)
        return sorted(found)


def parse_layout(text: str) -> FourRoomsLayout:
    rows: List[str] = []
    letters: Optional[str] = None
    for line in text.splitlines():
        line = line.rstrip()
        if not line or line.startswith(MAP_COMMENT):
            continue
        if line.startswith(MAP_ACTIONS_PREFIX):
            letters = line[len(MAP_ACTIONS_PREFIX):].strip()
            continue
        rows.append(line)

    if not rows:
        raise MapFormatError("no grid rows found")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise MapFormatError("grid rows have different lengths")

    valid = MAP_WALL + MAP_FREE + MAP_HALLWAY + MAP_START + MAP_HV_DIGITS
    cells, walls, hallway_cells, starts, hv = [], set(), [], [], {}
    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            if ch not in valid:
                raise MapFormatError(f"unexpected character '{ch}' at ({r}, {c})")
            if ch == MAP_WALL:
                walls.add((r, c))
                continue
            cells.append((r, c))
            if ch == MAP_HALLWAY:
                hallway_cells.append((r, c))
            elif ch == MAP_START:
                starts.append((r, c))
            elif ch in MAP_HV_DIGITS:
                hv[int(ch)] = (r, c)

    if len(starts) != 1:
        raise MapFormatError(f"expected exactly one start cell, found {len(starts)}")
    if hv:
        if letters is None or len(letters) != len(hv) or sorted(hv) != list(range(1, len(hv) + 1)):
            raise MapFormatError("high-variance states need a matching `actions:` line")
        if any(ch not in ACTION_LETTERS for ch in letters):
            raise MapFormatError(f"unknown action letters in '{letters}'")

    index = {c: i for i, c in enumerate(cells)}
    hallways = tuple(sorted(index[c] for c in hallway_cells))
    hv_states = tuple((index[hv[k]], ACTION_LETTERS.index(letters[k - 1])) for k in sorted(hv))

    layout = FourRoomsLayout(height=len(rows), width=width, cells=tuple(cells),
                             walls=frozenset(walls), hallways=hallways,
                             start=index[starts[0]], hv_states=hv_states, rooms=())

    # rooms are the connected components of the non-hallway cells
    rooms: List[FrozenSet[int]] = []
    seen = set(hallways)
    for s in range(len(cells)):
        if s in seen:
            continue
        component, queue = set(), deque([s])
        seen.add(s)
        while queue:
            u = queue.popleft()
            component.add(u)
            for a in MOVES:
                v = fourrooms_step(layout, u, a)
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        rooms.append(frozenset(component))

    return FourRoomsLayout(height=layout.height, width=layout.width, cells=layout.cells,
                           walls=layout.walls, hallways=layout.hallways, start=layout.start,
                           hv_states=layout.hv_states, rooms=tuple(rooms))


@functools.lru_cache(maxsize=None)
def load_layout(path: str = DEFAULT_FOURROOMS_MAP) -> FourRoomsLayout:
    logging.debug(f"[ENV] Loading map from {path}")
    with open(path, "r") as f:
        return parse_layout(f.read())


def fourrooms_step(layout: FourRoomsLayout, state: int, action: int) -> int:
    """
    Deterministic move; walls and the grid boundary leave the state unchanged
    """
    if not 0 <= state < layout.n_states:
        raise InvalidStateError(f"four rooms state {state}")
    if action not in MOVES:
        raise IllegalActionError(f"unknown four rooms action {action}")
    r, c = layout.cells[state]
    dr, dc = MOVES[action]
    nr, nc = r + dr, c + dc
    if not (0 <= nr < layout.height and 0 <= nc < layout.width) or (nr, nc) in layout.walls:
        return state
    return layout.index[(nr, nc)]


class TileCoder(object):
    """
    Grid tile coding: `tilings` tilings of square tiles `tile_width` cells
    wide, tiling k shifted by k/tilings of a tile width in both dimensions.
    """

    def __init__(self, layout: FourRoomsLayout, tilings: int = 4, tile_width: int = 2):
        self.layout = layout
        self.grid_extent = (layout.height, layout.width)
        self.tilings = tilings
        self.tile_width = tile_width
        self.tiles_per_row = layout.height // tile_width + 1
        self.tiles_per_col = layout.width // tile_width + 1
        self.tiles_per_tiling = self.tiles_per_row * self.tiles_per_col
        self.dim = tilings * self.tiles_per_tiling

    def encode(self, state) -> FeatureVector:
        if isinstance(state, tuple):
            if state in self.layout.walls:
                raise InvalidStateError(f"{state} is a wall")
            r, c = self.layout.cells[self.layout.state_of(state)]
        else:
            if not 0 <= state < self.layout.n_states:
                raise InvalidStateError(f"four rooms state {state}")
            r, c = self.layout.cells[state]

        active = []
        span = self.tile_width * self.tilings
        for k in range(self.tilings):
            # floor((coord + k * width / tilings) / width), in integers
            tr = (r * self.tilings + k * self.tile_width) // span
            tc = (c * self.tilings + k * self.tile_width) // span
            active.append(k * self.tiles_per_tiling + tr * self.tiles_per_col + tc)
        return FeatureVector.binary(self.dim, active)

    def __repr__(self) -> str:
        return f"TileCoder(extent={self.grid_extent}, tilings={self.tilings}, width={self.tile_width}, dim={self.dim})"


def tile_encode(coder: TileCoder, state) -> FeatureVector:
    return coder.encode(state)


def bfs_distances(layout: FourRoomsLayout, goal: int) -> np.ndarray:
    """
    Number of moves from every state to `goal` (-1 when unreachable)
    """
    dist = np.full(layout.n_states, -1, dtype=np.int64)
    dist[goal] = 0
    queue = deque([goal])
    while queue:
        u = queue.popleft()
        # moves are reversible, so distances to the goal are distances from it
        for a in MOVES:
            v = fourrooms_step(layout, u, a)
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def target_shortest_path_policy(layout: FourRoomsLayout, hallway: int) -> TabularPolicy:
    """
    Uniform over the actions that strictly decrease the distance to the
    hallway. In the hallway itself every action is equally likely.
    """
    dist = bfs_distances(layout, hallway)
    if np.any(dist < 0):
        unreachable = [layout.cells[s] for s in np.flatnonzero(dist < 0)]
        raise UnreachableHallwayError(f"hallway {layout.cells[hallway]} unreachable from {unreachable}")

    probs = np.zeros((layout.n_states, len(MOVES)))
    for s in range(layout.n_states):
        if s == hallway:
            probs[s, :] = 1.0 / len(MOVES)
            continue
        closer = [a for a in MOVES if dist[fourrooms_step(layout, s, a)] < dist[s]]
        probs[s, closer] = 1.0 / len(closer)
    return TabularPolicy(probs)


def make_fourrooms_gvfs(layout: FourRoomsLayout, gamma: float = DEFAULT_GAMMA) -> List[GvfSpec]:
    """
    Two GVFs per room, one per adjacent hallway: the cumulant is 1 on
    entering the hallway, and the discount is 0 on entering it or when
    starting outside the room.
    """
    gvfs = []
    targets: Dict[int, TabularPolicy] = {}
    for room_id, room in enumerate(layout.rooms):
        for hallway in layout.room_hallways(room_id):
            if hallway not in targets:
                targets[hallway] = target_shortest_path_policy(layout, hallway)

            def cumulant(s, a, s_next, h=hallway):
                return 1.0 if s_next == h and s != h else 0.0

            def discount(s, a, s_next, h=hallway, room=room):
                return 0.0 if s_next == h or s not in room else gamma

            def interest(s, room=room):
                return 1.0 if s in room else 0.0

            name = f"room{room_id}-hallway{layout.cells[hallway][0]}x{layout.cells[hallway][1]}"
            gvfs.append(GvfSpec(name=name, target=targets[hallway],
                                cumulant=cumulant, discount=discount, interest=interest))
    return gvfs


def high_variance_behavior(layout: FourRoomsLayout, high: float = 0.97, low: float = 0.01) -> TabularPolicy:
    """
    Equiprobable, except in the map's designated states, where the designated
    action has probability `high` and every other action `low`.
    """
    probs = np.full((layout.n_states, len(MOVES)), 1.0 / len(MOVES))
    for s, action in layout.hv_states:
        probs[s, :] = low
        probs[s, action] = high
    return TabularPolicy(probs)


###############################################################################
# problems
###############################################################################

class Problem(object):
    """
    A behavior stream plus the GVFs learned from it.

    Subclasses provide the dynamics (`outcomes`, `next_state`, `reset`,
    `is_terminal`); `step` turns one behavior action into one transition per GVF.
    """

    name: str = ""
    episodic: bool = False

    def __init__(self, behavior: TabularPolicy, gvfs: List[GvfSpec], features: Sequence[FeatureVector]):
        self.behavior = behavior
        self.gvfs = gvfs
        self.features = tuple(features)
        self.feature_matrix = np.array([x.dense for x in self.features])
        for g in gvfs:
            if not behavior.covers(g.target):
                logging.warning(f"[ENV] {self.name}: behavior does not cover the target of {g.name}")

    @property
    def n_states(self) -> int:
        return self.behavior.n_states

    @property
    def n_actions(self) -> int:
        return self.behavior.n_actions

    @property
    def dim(self) -> int:
        return self.features[0].dim

    def interest_vector(self, gvf: int) -> np.ndarray:
        return np.array([self.gvfs[gvf].interest_of(s) for s in range(self.n_states)])

    def reset(self, rng: np.random.Generator) -> int:
        raise NotImplementedError

    def outcomes(self, state: int, action: int) -> List[Tuple[float, int]]:
        raise NotImplementedError

    def next_state(self, state: int, action: int, rng: np.random.Generator) -> int:
        raise NotImplementedError

    def is_terminal(self, state: int, action: int) -> bool:
        return False

    def step(self, state: int, rng: np.random.Generator,
             episode_start: bool = False) -> Tuple[List[Transition], int, bool]:
        """
        Take one behavior action; returns the transitions (one per GVF),
        the next state and whether the episode ended.
        """
        a = self.behavior.sample(state, rng)
        s_next = self.next_state(state, a, rng)
        b = self.behavior.prob(state, a)
        x, x_next = self.features[state], self.features[s_next]
        transitions = [Transition(s=state, a=a, s_next=s_next,
                                  reward=g.cumulant(state, a, s_next),
                                  gamma_next=g.gamma(state, a, s_next),
                                  pi_prob=g.target.prob(state, a),
                                  b_prob=b,
                                  interest=g.interest_of(state),
                                  x=x, x_next=x_next,
                                  episode_start=episode_start)
                       for g in self.gvfs]
        return transitions, s_next, self.is_terminal(state, a)

    def __str__(self) -> str:
        return f"{self.name}"


class CollisionProblem(Problem):
    name = PROBLEM_COLLISION
    episodic = True

    def __init__(self, features: str = "binary", seed: int = 0):
        if features == "tabular":
            table = make_tabular_features(COLLISION_N_STATES)
        else:
            table = make_collision_features(np.random.default_rng(seed), rng_seed=seed).table
        self.env = CollisionEnv(features=table, rng_seed=seed)
        gvf = GvfSpec(name="collision", target=self.env.target,
                      cumulant=self.env.cumulant, discount=self.env.discount,
                      interest=lambda s: 1.0)
        super().__init__(self.env.behavior, [gvf], table)

    def reset(self, rng: np.random.Generator) -> int:
        return self.env.reset(rng)

    def outcomes(self, state: int, action: int) -> List[Tuple[float, int]]:
        return self.env.outcomes(state, action)

    def next_state(self, state: int, action: int, rng: np.random.Generator) -> int:
        return self.env.next_state(state, action, rng)

    def is_terminal(self, state: int, action: int) -> bool:
        return self.env.is_terminal(state, action)


class FourRoomsProblem(Problem):
    name = PROBLEM_FOURROOMS

    def __init__(self, layout: Optional[FourRoomsLayout] = None, high_variance: bool = False):
        self.layout = layout or load_layout()
        self.coder = TileCoder(self.layout)
        if high_variance:
            self.name = PROBLEM_HV_FOURROOMS
            behavior = high_variance_behavior(self.layout)
        else:
            behavior = TabularPolicy(np.full((self.layout.n_states, len(MOVES)), 1.0 / len(MOVES)))
        features = [self.coder.encode(s) for s in range(self.layout.n_states)]
        super().__init__(behavior, make_fourrooms_gvfs(self.layout), features)

    def reset(self, rng: np.random.Generator) -> int:
        return self.layout.start

    def outcomes(self, state: int, action: int) -> List[Tuple[float, int]]:
        return [(1.0, fourrooms_step(self.layout, state, action))]

    def next_state(self, state: int, action: int, rng: np.random.Generator) -> int:
        return fourrooms_step(self.layout, state, action)


def make_problem(name: str, features: str = "binary", seed: int = 0) -> Problem:
    """
    Build a problem by id. `seed` only matters for the random Collision features.
    """
    if name == PROBLEM_COLLISION:
        return CollisionProblem(features=features, seed=seed)
    if name == PROBLEM_FOURROOMS:
        return FourRoomsProblem()
    if name == PROBLEM_HV_FOURROOMS:
        return FourRoomsProblem(high_variance=True)
    raise UnknownProblemError(f"unknown problem '{name}', expected one of {', '.join(PROBLEM_IDS)}")
