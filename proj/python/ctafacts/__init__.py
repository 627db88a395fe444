# Copyright 2026 The CTA Facts Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python access to the fact store, curation, dialogue engine and simulator."""

import json as _json

from ctafacts import _core
from ctafacts._core import Error, Session, split_sentences, store_stats, validate_store

__all__ = [
    "Engine",
    "Error",
    "Session",
    "compute_feature_weights",
    "curate",
    "score_interestingness",
    "split_sentences",
    "store_stats",
    "validate_store",
    "welch_t_test",
]


def compute_feature_weights(counts):
    """Normalized weights from {feature: count} for the four weighted features."""
    return _json.loads(_core.compute_feature_weights(dict(counts)))


def score_interestingness(labels, weights):
    return _core.score_interestingness(_json.dumps(labels), _json.dumps(weights))


def curate(candidates_path, config, corpus_path):
    """Runs the curation pipeline; returns {"facts": [...], "report": {...}}."""
    return _json.loads(_core.curate(str(candidates_path), _json.dumps(config), str(corpus_path)))


def welch_t_test(a, b):
    t, df, p = _core.welch_t_test(list(a), list(b))
    return {"t": t, "df": df, "p_value": p}


class Engine:
    """Conversation engine over a fact store and task corpus."""

    def __init__(self, store_path, corpus_path, policy=None, facts_enabled=True):
        self._engine = _core.Engine(
            str(store_path), str(corpus_path), _json.dumps(policy or {}), facts_enabled
        )

    def start_session(self, session_id):
        return self._engine.start_session(session_id)

    def turn(self, session, utterance):
        """Handles one user utterance and returns the assistant turn as a dict."""
        return _json.loads(self._engine.turn(session, utterance))

    def run_ab(self, user_model, n_per_arm=500, base_seed=42):
        return _json.loads(self._engine.run_ab(_json.dumps(user_model), n_per_arm, base_seed))
