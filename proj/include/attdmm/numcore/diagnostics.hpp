#pragma once

#include <atomic>
#include <iostream>
#include <string_view>

namespace attdmm::diagnostics {

inline std::atomic<long>& degenerate_attention_keys() {
  static std::atomic<long> count{0};
  return count;
}

// A projected attention key had zero norm; its similarity was taken as 0.
// Logged once per process, counted always.
inline void note_degenerate_attention_key() {
  if (degenerate_attention_keys().fetch_add(1) == 0) {
    std::clog << "[warn] zero-norm attention key, cosine similarity set to 0\n";
  }
}

}  // namespace attdmm::diagnostics
