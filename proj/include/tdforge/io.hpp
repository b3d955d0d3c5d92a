#pragma once

#include "tdforge/learner.hpp"
#include "tdforge/probe.hpp"

#include <string>
#include <vector>

namespace tdforge {

/// MDP, policy, induced chain (with pi) and feature map bundled as one experiment input.
struct Instance {
  std::string name;
  Mdp mdp;
  Policy policy;
  InducedChain chain;
  FeatureMap features;
};

/// Validates the pieces, induces the chain, certifies ergodicity and computes pi.
Instance assemble_instance(std::string name, Mdp mdp, Policy policy, Matrix phi);

std::string instance_to_json(const Instance& instance);

/// Parses and re-validates an instance document. Row sums are checked at 1e-9,
/// pi and phi_inf are recomputed and must agree with the stored values within 1e-9.
Instance instance_from_json(const std::string& text);

Instance load_instance(const std::string& path);
void save_instance(const Instance& instance, const std::string& path);

/// {"theta_star", "f_min_eig", "cond_A"}.
std::string oracle_summary_json(const TdOracle& oracle);

/// Shortest decimal string that parses back to the same double; empty for NaN.
std::string format_double(double x);

/// Columns t,eta,theta_norm,dist_to_star,f_value,grad_norm,ell.
std::string run_record_csv(const RunRecord& record);

/// {"theta_bar", "sum_eta", "f_bar", "seed", "config"}.
std::string run_summary_json(const RunRecord& record);

/// Columns lemma_id,params,lhs,bound,slack,pass.
std::string lemma_reports_csv(const std::vector<LemmaReport>& reports);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace tdforge
