#pragma once

#include <map>
#include <string>
#include <vector>

#include "advae/corpus.hpp"
#include "advae/eval.hpp"
#include "advae/model.hpp"

namespace advae::manip {

// role -> winning variable (m1), derived from a measured influence matrix.
// Never hand-entered; carries the provenance of the matrix it came from.
struct RoleVariableMap {
  std::map<std::string, int> role_to_var;
  std::string source_kind;    // dec / enc / struct / pb
  std::string checkpoint_id;

  static RoleVariableMap from_report(const eval::DisentanglementReport& report,
                                     const std::string& checkpoint_id);
  void save(const std::string& path) const;
  static RoleVariableMap load(const std::string& path);

  // Variable index for a role; throws with the available roles listed.
  int variable_for(const std::string& role) const;
};

struct ManipResult {
  std::vector<std::string> tokens;  // greedy decode of the edited code
  Matrix latent_before;
  Matrix latent_after;
};

// Encode to posterior means, replace the role's variable with a fresh prior
// draw, greedy-decode.
ManipResult resample_role(const model::Model& m, const corpus::Vocab& vocab,
                          const std::vector<std::string>& sentence, const std::string& role,
                          const RoleVariableMap& map, uint64_t seed);

// Exchange the role's variable between the two sentences' posterior-mean
// codes and decode both.
std::pair<ManipResult, ManipResult> swap_role(const model::Model& m, const corpus::Vocab& vocab,
                                              const std::vector<std::string>& s1,
                                              const std::vector<std::string>& s2,
                                              const std::string& role,
                                              const RoleVariableMap& map);

}  // namespace advae::manip
