from __future__ import annotations

import pytest

from gmas_harness.analyzer import PolicyRuleSet
from gmas_harness.backends import ScriptedBackend
from gmas_harness.embeddings import DeterministicEmbedder
from gmas_harness.orchestrator import ExperimentEnv, RunConfig, StoreSet
from gmas_harness.ricsim import Cell, SimulatedNetwork, Slice
from gmas_harness.scenario import PersonaRegistry, generate_questions

TEST_DIM = 64  # small but collision-sparse enough for metric tests


@pytest.fixture
def embedder():
    return DeterministicEmbedder(TEST_DIM)


@pytest.fixture
def registry():
    return PersonaRegistry.builtin()


@pytest.fixture
def network():
    return SimulatedNetwork(
        cells=(Cell("c1", 24), Cell("c2", 16)),
        slices=(Slice("s1", "c1", 4.0), Slice("s2", "c1", 6.0),
                Slice("s3", "c2", 5.0)))


@pytest.fixture
def policy_rules():
    return PolicyRuleSet(
        forbidden_calls=("os.system", "eval", "ric.shutdown_cell"),
        forbidden_imports=("os", "subprocess"),
        conflict_rules=(("admit", "reject", "slice"),),
        resource_caps=(("prb", 40),),
    )


@pytest.fixture
def questions():
    return generate_questions(2, seed=7)


@pytest.fixture
def make_env(registry, network, policy_rules):
    def _make(backend=None, config=None, stores=None, rules=policy_rules,
              experiment_id="exp-test"):
        return ExperimentEnv(
            config=config or RunConfig(),
            backend=backend or ScriptedBackend(fallback_seed=42, dim=TEST_DIM),
            stores=stores or StoreSet(),
            registry=registry,
            network=network,
            policy_rules=rules,
            experiment_id=experiment_id,
        )
    return _make
