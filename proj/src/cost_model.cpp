/*
 * Copyright 2026 The nestq Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "nestq/cost_model.hpp"

namespace nestq {

std::string to_string(TransitionMode mode) { return mode == TransitionMode::Dqt ? "dqt" : "standard"; }

std::string to_string(MacMode mode) {
  switch (mode) {
    case MacMode::Standard: return "standard";
    case MacMode::DqtGeneral: return "dqt_general";
    case MacMode::DqtFactored: return "dqt_factored";
    case MacMode::DqtPact: return "dqt_pact";
  }
  return "unknown";
}

TransitionMode transition_mode_from_string(std::string_view s) {
  if (s == "dqt") return TransitionMode::Dqt;
  if (s == "standard") return TransitionMode::Standard;
  fail(ErrorCode::InvalidArgument, "unknown cost mode '" + std::string(s) + "' (expected dqt or standard)");
}

namespace {

// Calls f(layer, bits) for every policy layer in execution order.
template <class F>
void for_policy_layers(const ModelGraph& model, const BitPolicy& policy, F&& f) {
  validate_policy(policy, model);
  std::size_t p = 0;
  for (const auto& L : model.layers) {
    if (takes_policy(L.kind)) f(L, policy.bits[p++]);
  }
}

}  // namespace

std::uint64_t bitops(const ModelGraph& model, const BitPolicy& policy) {
  std::uint64_t total = 0;
  for_policy_layers(model, policy, [&](const LayerSpec& L, int b) {
    total += L.macs() * static_cast<std::uint64_t>(b) * static_cast<std::uint64_t>(b);
  });
  return total;
}

std::uint64_t transition_elements(const ModelGraph& model, const BitPolicy& policy) {
  std::uint64_t e = 0;
  for_policy_layers(model, policy, [&](const LayerSpec& L, int b) {
    if (b >= model.master_bits) return;
    const std::uint64_t operands = L.kind == LayerKind::ResidualAdd ? 2 : 1;
    e += L.weight_count() + operands * element_count(L.input_shape);
  });
  return e;
}

TransitionCost transition_cost(const ModelGraph& model, const BitPolicy& policy, TransitionMode mode) {
  TransitionCost c;
  c.elements = transition_elements(model, policy);
  if (mode == TransitionMode::Dqt) {
    c.shifts = c.elements;
  } else {
    c.conversions = 2 * c.elements;
    c.mults = c.divs = c.adds = c.subs = c.rounds = c.elements;
  }
  return c;
}

MacCounts mac_primitive_counts(MacMode mode) {
  switch (mode) {
    case MacMode::Standard: return {1, 3};
    case MacMode::DqtGeneral: return {3, 2};
    case MacMode::DqtFactored: return {1, 3};
    case MacMode::DqtPact: return {1, 2};
  }
  fail(ErrorCode::Internal, "unknown MAC mode");
}

CycleEstimate cycle_estimate(std::uint64_t elements, TransitionMode mode) {
  const auto e = static_cast<double>(elements);
  if (mode == TransitionMode::Dqt) return {e * kShiftCycles, e * kShiftCycles};
  return {e * kStandardCyclesLow, e * kStandardCyclesHigh};
}

CostReport cost_report(const ModelGraph& model, const BitPolicy& policy, TransitionMode mode) {
  CostReport r;
  r.mode = mode;
  r.policy = policy;
  r.master_bits = model.master_bits;
  r.bitops = bitops(model, policy);
  for_policy_layers(model, policy, [&](const LayerSpec& L, int b) {
    r.layer_names.push_back(L.name);
    r.layer_macs.push_back(L.macs());
    r.layer_bits.push_back(b);
    MacMode form = MacMode::Standard;
    if (mode == TransitionMode::Dqt) {
      form = L.calibrated && L.input_params.offset == 0.0 ? MacMode::DqtPact : MacMode::DqtFactored;
    }
    const auto counts = mac_primitive_counts(form);
    r.inloop_mults += L.macs() * static_cast<std::uint64_t>(counts.mults);
    r.inloop_adds += L.macs() * static_cast<std::uint64_t>(counts.adds);
  });
  r.transition_elements = transition_elements(model, policy);
  r.transition_shift_ops = transition_cost(model, policy, TransitionMode::Dqt).primitives();
  r.transition_fp_primitives = transition_cost(model, policy, TransitionMode::Standard).primitives();
  r.transition_fp_muldiv = 2 * r.transition_elements;
  r.dqt_cycles = cycle_estimate(r.transition_elements, TransitionMode::Dqt);
  r.standard_cycles = cycle_estimate(r.transition_elements, TransitionMode::Standard);
  return r;
}

}  // namespace nestq
