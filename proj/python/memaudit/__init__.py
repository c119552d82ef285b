# Copyright 2026 The memaudit Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Memorization audit for language models.

The heavy lifting lives in the compiled ``_memaudit`` extension.
"""

from memaudit._memaudit import (
    aggregate,
    calibrated_scores,
    classify_form,
    contextualize,
    decide_memorization,
    generic_subject,
    instantiate,
    memorization_strength,
    rank_candidates,
    render_baseline,
    sample_counterfactuals,
    score_with_table,
    similar_names,
)

__all__ = [
    "aggregate",
    "calibrated_scores",
    "classify_form",
    "contextualize",
    "decide_memorization",
    "generic_subject",
    "instantiate",
    "memorization_strength",
    "rank_candidates",
    "render_baseline",
    "sample_counterfactuals",
    "score_with_table",
    "similar_names",
]
