#pragma once

// JSON forms of the analysis reports. nlohmann prints doubles in shortest
// round-trip form, so equal reports serialize to equal bytes.

#include <nlohmann/json.hpp>

#include <vector>

#include "exspec/degree.hpp"
#include "exspec/scaling.hpp"
#include "exspec/spectra.hpp"
#include "exspec/subset.hpp"
#include "exspec/tail.hpp"

namespace exspec {

inline nlohmann::json vector_json(const Vector& x) {
  return std::vector<double>(x.data(), x.data() + x.size());
}

inline nlohmann::json spectra_json(const SingularSpectrum& s) {
  return {{"s1", s.s1()}, {"s2", s.s2()}, {"tol", s.tol}};
}

inline void to_json(nlohmann::json& j, const PerronCheck& p) {
  j = {{"rho", p.rho},
       {"residual", p.residual},
       {"radius", p.radius},
       {"is_eigen", p.is_eigen},
       {"matches_radius", p.matches_radius}};
}

inline void to_json(nlohmann::json& j, const DegMembership& r) {
  j = {{"m", r.m},         {"d", r.d},           {"delta", r.delta},
       {"member", r.member}, {"worst_k", r.worst_k}, {"l1_gap", r.l1_gap},
       {"k_max", r.k_max}};
}

inline void to_json(nlohmann::json& j, const ScalingReport& r) {
  j = {{"m", r.m},
       {"d", r.d},
       {"delta", r.delta},
       {"lhs", r.lhs},
       {"s2", r.s2},
       {"beta", r.beta},
       {"beta_dense", r.beta_dense},
       {"bound", r.bound},
       {"hypotheses_ok", r.hypotheses_ok},
       {"conclusion_holds", r.conclusion_holds()},
       {"beta_within_bound", r.beta_within_bound()},
       {"margin_checks",
        {{"inf_u", r.margin_checks.inf_u},
         {"inf_v", r.margin_checks.inf_v},
         {"l2_u", r.margin_checks.l2_u},
         {"l2_v", r.margin_checks.l2_v}}},
       {"scaled", {{"s1", r.scaled_s1}, {"s2", r.scaled_s2}, {"deflated_norm", r.scaled_deflated_norm}}},
       {"svd_identity_holds", r.svd_identity_holds()},
       {"beta_terms", r.beta_terms},
       {"prefactor", r.prefactor},
       {"chain_bound", r.chain_bound},
       {"gram_perron", r.gram_perron},
       {"tol", r.tol}};
}

/// {m, k, a_hash, statistic, value, exact, trials, seed, ci}.
inline nlohmann::json subset_result_json(const SubsetSumProblem& p, const std::string& statistic,
                                         double value, bool exact, std::size_t trials,
                                         std::uint64_t seed, double ci) {
  return {{"m", p.m()},         {"k", p.k()},         {"a_hash", weights_hash(p.a())},
          {"statistic", statistic}, {"value", value}, {"exact", exact},
          {"trials", trials},   {"seed", seed},       {"ci", ci}};
}

inline void to_json(nlohmann::json& j, const SubsetMomentReport& r) {
  j = {{"second_moment_exact", r.second_moment_exact},
       {"fourth_moment_bound", r.fourth_moment_bound},
       {"fourth_moment_exact", r.fourth_moment_exact ? nlohmann::json(*r.fourth_moment_exact) : nlohmann::json()},
       {"t_u", r.t_u},
       {"mean", r.mean},
       {"beyond_lemma_range", r.beyond_lemma_range}};
}

inline void to_json(nlohmann::json& j, const Lemma31Result& r) {
  j = {{"norm_m", r.norm_m}, {"c_grid", r.c_grid}, {"p_hat", r.p_hat},
       {"ci", r.ci},         {"best_c", r.best_c}, {"trials", r.trials}};
}

inline void to_json(nlohmann::json& j, const Theorem1Result& r) {
  j = {{"curve", r.curve}, {"best_c", r.best_c}, {"event_rate", r.event_rate}};
}

inline void to_json(nlohmann::json& j, const Lemma41Result& r) {
  j = {{"p_e", r.p_e},
       {"ci", r.ci},
       {"trials", r.trials},
       {"hypothesis_fraction", r.hypothesis_fraction},
       {"hypothesis_c", r.hypothesis_c},
       {"large_degree", r.large_degree},
       {"inf_bound_violations", r.inf_bound_violations},
       {"l2_bound_violations", r.l2_bound_violations}};
}

inline void to_json(nlohmann::json& j, const Theorem2Result& r) {
  j = {{"curve", r.curve},
       {"best_c", r.best_c},
       {"degree_ratio", r.degree_ratio},
       {"hypothesis_c", r.hypothesis_c},
       {"hypothesis_ok", r.hypothesis_ok},
       {"member_rate", r.member_rate},
       {"max_relabel_gap", r.max_relabel_gap},
       {"row_chain_violations", r.row_chain_violations},
       {"delta_chain_violations", r.delta_chain_violations},
       {"delta_chain_applicable", r.delta_chain_applicable}};
}

}  // namespace exspec
