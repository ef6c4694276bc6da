#include "advae/manip.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace advae::manip {

using nlohmann::json;

RoleVariableMap RoleVariableMap::from_report(const eval::DisentanglementReport& report,
                                             const std::string& checkpoint_id) {
  RoleVariableMap out;
  out.source_kind = report.kind;
  out.checkpoint_id = checkpoint_id;
  for (const auto& d : report.per_role) {
    if (d.missing) continue;
    out.role_to_var[d.role] = d.m1;
  }
  return out;
}

void RoleVariableMap::save(const std::string& path) const {
  json j;
  j["source_kind"] = source_kind;
  j["checkpoint_id"] = checkpoint_id;
  j["role_to_var"] = role_to_var;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write role map: " + path);
    os << j.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

RoleVariableMap RoleVariableMap::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open role map: " + path);
  json j;
  is >> j;
  RoleVariableMap out;
  out.source_kind = j.value("source_kind", "");
  out.checkpoint_id = j.value("checkpoint_id", "");
  for (const auto& [k, v] : j.at("role_to_var").items())
    out.role_to_var[k] = v.get<int>();
  return out;
}

int RoleVariableMap::variable_for(const std::string& role) const {
  const auto it = role_to_var.find(role);
  if (it != role_to_var.end()) return it->second;
  std::string available;
  for (const auto& [k, v] : role_to_var) {
    if (!available.empty()) available += ", ";
    available += k;
  }
  throw std::runtime_error("role '" + role + "' not in map; available roles: " +
                           (available.empty() ? "(none)" : available));
}

namespace {

Matrix posterior_mean_code(const model::Model& m, const corpus::Vocab& vocab,
                           const std::vector<std::string>& sentence) {
  if (sentence.empty()) throw std::runtime_error("empty sentence");
  const auto ids = corpus::encode(vocab, sentence);
  return m.encode_posterior(ids).top().mu;
}

ManipResult decode_result(const model::Model& m, const corpus::Vocab& vocab, Matrix before,
                          Matrix after) {
  ManipResult out;
  out.tokens = corpus::decode(vocab, m.greedy_decode(after, m.config().max_len));
  out.latent_before = std::move(before);
  out.latent_after = std::move(after);
  return out;
}

}  // namespace

ManipResult resample_role(const model::Model& m, const corpus::Vocab& vocab,
                          const std::vector<std::string>& sentence, const std::string& role,
                          const RoleVariableMap& map, uint64_t seed) {
  const int var = map.variable_for(role);
  if (var < 0 || var >= m.config().n_vars())
    throw std::runtime_error("mapped variable out of range for this checkpoint");
  Matrix code = posterior_mean_code(m, vocab, sentence);
  Matrix edited = code;
  Rng rng(seed);
  const Matrix fresh = m.sample_prior(rng);
  for (int j = 0; j < code.cols; ++j) edited.at(var, j) = fresh.at(var, j);
  return decode_result(m, vocab, std::move(code), std::move(edited));
}

std::pair<ManipResult, ManipResult> swap_role(const model::Model& m, const corpus::Vocab& vocab,
                                              const std::vector<std::string>& s1,
                                              const std::vector<std::string>& s2,
                                              const std::string& role,
                                              const RoleVariableMap& map) {
  const int var = map.variable_for(role);
  if (var < 0 || var >= m.config().n_vars())
    throw std::runtime_error("mapped variable out of range for this checkpoint");
  const Matrix a = posterior_mean_code(m, vocab, s1);
  const Matrix b = posterior_mean_code(m, vocab, s2);
  Matrix a2 = a;
  Matrix b2 = b;
  for (int j = 0; j < a.cols; ++j) {
    a2.at(var, j) = b.at(var, j);
    b2.at(var, j) = a.at(var, j);
  }
  return {decode_result(m, vocab, a, std::move(a2)), decode_result(m, vocab, b, std::move(b2))};
}

}  // namespace advae::manip
