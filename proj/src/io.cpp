#include "tdforge/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tdforge {

namespace {

using Json = nlohmann::ordered_json;

constexpr double kLoadTolerance = 1e-9;

Json matrix_rows(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back(m(i, j));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(v(i));
  }
  return out;
}

const Json& field(const Json& doc, const char* key) {
  if (!doc.contains(key)) {
    throw InvalidInput(std::string("instance document is missing \"") + key + "\"");
  }
  return doc.at(key);
}

std::size_t count_field(const Json& doc, const char* key) {
  const Json& v = field(doc, key);
  if (!v.is_number_integer() || v.get<long long>() < 1) {
    throw InvalidInput(std::string("\"") + key + "\" must be a positive integer");
  }
  return v.get<std::size_t>();
}

Matrix matrix_from(const Json& rows, std::size_t n_rows, std::size_t n_cols, const std::string& what) {
  if (!rows.is_array() || rows.size() != n_rows) {
    throw InvalidInput(what + ": expected " + std::to_string(n_rows) + " rows");
  }
  Matrix m(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
  for (std::size_t i = 0; i < n_rows; ++i) {
    const Json& row = rows[i];
    if (!row.is_array() || row.size() != n_cols) {
      throw InvalidInput(what + ": row " + std::to_string(i) + " must have " +
                         std::to_string(n_cols) + " entries");
    }
    for (std::size_t j = 0; j < n_cols; ++j) {
      if (!row[j].is_number()) {
        throw InvalidInput(what + ": non-numeric entry at [" + std::to_string(i) + "][" +
                           std::to_string(j) + "]");
      }
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j].get<double>();
    }
  }
  return m;
}

// Rejects rows off by more than the load tolerance and renormalizes rows off by more than 1e-12.
void check_rows(Matrix& m, const std::string& what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double sum = m.row(i).sum();
    if (std::abs(sum - 1.0) > kLoadTolerance) {
      std::ostringstream os;
      os.precision(17);
      os << what << ": row " << i << " sums to " << sum << ", not 1 (row-stochastic invariant)";
      throw InvalidInput(os.str());
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      m.row(i) /= sum;
    }
  }
}

}  // namespace

Instance assemble_instance(std::string name, Mdp mdp, Policy policy, Matrix phi) {
  validate(mdp);
  validate(policy, mdp.n_states, mdp.n_actions);
  Instance instance;
  instance.name = std::move(name);
  instance.chain = with_stationary(induce_chain(mdp, policy));
  instance.features = build_feature_map(std::move(phi));
  if (instance.features.n_states() != mdp.n_states) {
    throw InvalidInput("feature matrix has " + std::to_string(instance.features.n_states()) +
                       " rows, expected " + std::to_string(mdp.n_states));
  }
  instance.mdp = std::move(mdp);
  instance.policy = std::move(policy);
  return instance;
}

std::string instance_to_json(const Instance& instance) {
  const Mdp& mdp = instance.mdp;
  Json doc;
  doc["name"] = instance.name;
  doc["n_states"] = mdp.n_states;
  doc["n_actions"] = mdp.n_actions;
  doc["gamma"] = mdp.gamma;
  Json transition = Json::array();
  Json reward = Json::array();
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    Json t_s = Json::array();
    Json r_s = Json::array();
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      t_s.push_back(vector_json(mdp.transition[a].row(static_cast<Eigen::Index>(s)).transpose()));
      r_s.push_back(vector_json(mdp.reward[a].row(static_cast<Eigen::Index>(s)).transpose()));
    }
    transition.push_back(std::move(t_s));
    reward.push_back(std::move(r_s));
  }
  doc["transition"] = std::move(transition);
  doc["reward"] = std::move(reward);
  doc["policy"] = matrix_rows(instance.policy.probs);
  doc["features"] = matrix_rows(instance.features.phi);
  doc["phi_inf"] = instance.features.phi_inf;
  doc["pi"] = vector_json(instance.chain.stationary());
  return doc.dump(2) + "\n";
}

Instance instance_from_json(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(std::string("instance is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    throw InvalidInput("instance document must be a JSON object");
  }
  Mdp mdp;
  mdp.n_states = count_field(doc, "n_states");
  mdp.n_actions = count_field(doc, "n_actions");
  const Json& gamma = field(doc, "gamma");
  if (!gamma.is_number()) {
    throw InvalidInput("\"gamma\" must be a number");
  }
  mdp.gamma = gamma.get<double>();

  const std::size_t n = mdp.n_states;
  const std::size_t na = mdp.n_actions;
  const Json& transition = field(doc, "transition");
  const Json& reward = field(doc, "reward");
  if (!transition.is_array() || transition.size() != n || !reward.is_array() ||
      reward.size() != n) {
    throw InvalidInput("\"transition\" and \"reward\" must have one entry per state");
  }
  const auto nn = static_cast<Eigen::Index>(n);
  mdp.transition.assign(na, Matrix::Zero(nn, nn));
  mdp.reward.assign(na, Matrix::Zero(nn, nn));
  for (std::size_t s = 0; s < n; ++s) {
    const Matrix p_s = matrix_from(transition[s], na, n, "transition[" + std::to_string(s) + "]");
    const Matrix r_s = matrix_from(reward[s], na, n, "reward[" + std::to_string(s) + "]");
    for (std::size_t a = 0; a < na; ++a) {
      mdp.transition[a].row(static_cast<Eigen::Index>(s)) = p_s.row(static_cast<Eigen::Index>(a));
      mdp.reward[a].row(static_cast<Eigen::Index>(s)) = r_s.row(static_cast<Eigen::Index>(a));
    }
  }
  for (std::size_t a = 0; a < na; ++a) {
    check_rows(mdp.transition[a], "transition for action " + std::to_string(a));
  }

  Policy policy;
  policy.probs = matrix_from(field(doc, "policy"), n, na, "policy");
  check_rows(policy.probs, "policy");

  const Json& features = field(doc, "features");
  if (!features.is_array() || features.empty() || !features[0].is_array()) {
    throw InvalidInput("\"features\" must be a nested array");
  }
  Matrix phi = matrix_from(features, n, features[0].size(), "features");

  std::string name = doc.contains("name") && doc["name"].is_string()
                         ? doc["name"].get<std::string>()
                         : std::string("instance");
  Instance instance = assemble_instance(std::move(name), std::move(mdp), std::move(policy),
                                        std::move(phi));

  const Json& phi_inf = field(doc, "phi_inf");
  if (!phi_inf.is_number() ||
      std::abs(phi_inf.get<double>() - instance.features.phi_inf) > kLoadTolerance) {
    throw InvalidInput("stored phi_inf does not match the recomputed max feature row norm " +
                       format_double(instance.features.phi_inf));
  }
  if (doc.contains("pi")) {
    const Json& pi = doc["pi"];
    const Vector& computed = instance.chain.stationary();
    if (!pi.is_array() || pi.size() != n) {
      throw InvalidInput("\"pi\" must have one entry per state");
    }
    for (std::size_t s = 0; s < n; ++s) {
      if (!pi[s].is_number() ||
          std::abs(pi[s].get<double>() - computed(static_cast<Eigen::Index>(s))) >
              kLoadTolerance) {
        throw InvalidInput("stored pi disagrees with the stationary distribution at state " +
                           std::to_string(s));
      }
    }
  }
  return instance;
}

Instance load_instance(const std::string& path) {
  return instance_from_json(read_text_file(path));
}

void save_instance(const Instance& instance, const std::string& path) {
  write_text_file(path, instance_to_json(instance));
}

std::string oracle_summary_json(const TdOracle& oracle) {
  Json doc;
  doc["theta_star"] = vector_json(oracle.theta_star);
  doc["f_min_eig"] = hessian_min_eigenvalue(oracle);
  doc["cond_A"] = oracle.cond_a;
  return doc.dump(2) + "\n";
}

std::string format_double(double x) {
  if (std::isnan(x)) {
    return {};
  }
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), x);
  return std::string(buffer, result.ptr);
}

std::string run_record_csv(const RunRecord& record) {
  std::string out = "t,eta,theta_norm,dist_to_star,f_value,grad_norm,ell\n";
  for (const auto& step : record.steps) {
    out += std::to_string(step.t);
    for (double v : {step.eta, step.theta_norm, step.dist_to_star, step.f_value, step.grad_norm,
                     step.ell}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::string run_summary_json(const RunRecord& record) {
  Json doc;
  doc["theta_bar"] = vector_json(record.theta_bar);
  doc["sum_eta"] = record.sum_eta;
  doc["f_bar"] = record.has_oracle ? Json(record.f_bar) : Json(nullptr);
  doc["seed"] = record.config.seed;
  Json config;
  config["c"] = record.config.c_const;
  config["T"] = record.config.total_steps;
  config["record_stride"] = record.config.record_stride;
  config["initial_state"] = record.config.initial_state
                                ? Json(*record.config.initial_state)
                                : Json("stationary");
  doc["config"] = std::move(config);
  return doc.dump(2) + "\n";
}

std::string lemma_reports_csv(const std::vector<LemmaReport>& reports) {
  std::string out = "lemma_id,params,lhs,bound,slack,pass\n";
  for (const auto& r : reports) {
    out += r.lemma_id + ',' + r.params + ',' + format_double(r.lhs) + ',' +
           format_double(r.bound) + ',' + format_double(r.slack) + ',' +
           (r.pass ? "true" : "false") + '\n';
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InvalidInput("cannot open " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << text;
  if (!out) {
    throw std::runtime_error("write failed for " + path);
  }
}

}  // namespace tdforge
