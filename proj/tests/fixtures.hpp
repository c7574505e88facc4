#pragma once

#include <map>
#include <string>

#include "patchscope/dataset.hpp"

namespace fixture {

// Manifest with `counts[res]` images of each class per resolution class.
inline patchscope::Manifest balanced_manifest(const std::map<std::string, int>& counts) {
  using namespace patchscope;
  Manifest m;
  for (Label label : {Label::ActiveEoE, Label::NonEoE})
    for (const auto& [res, n] : counts)
      for (int i = 0; i < n; ++i) {
        const std::string id = std::string(label == Label::ActiveEoE ? "pos_" : "neg_") + res + "_" + std::to_string(i);
        m.push_back({id, id + ".png", label, ResolutionClass::parse(res)});
      }
  return m;
}

}  // namespace fixture
