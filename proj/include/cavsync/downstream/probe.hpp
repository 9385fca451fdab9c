// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_DOWNSTREAM_PROBE_HPP_
#define CAVSYNC_DOWNSTREAM_PROBE_HPP_

#include <string>

#include "cavsync/errors.hpp"
#include "cavsync/model/encoder.hpp"
#include "cavsync/numerics/ops.hpp"

namespace cavsync {

enum class TokenSource { kGlobal, kRegisterMean, kPatchMean };

inline const char* token_source_name(TokenSource s) {
  switch (s) {
    case TokenSource::kGlobal:
      return "global";
    case TokenSource::kRegisterMean:
      return "register_mean";
    case TokenSource::kPatchMean:
      return "patch_mean";
  }
  return "?";
}

inline TokenSource parse_token_source(const std::string& s) {
  if (s == "global") return TokenSource::kGlobal;
  if (s == "register_mean") return TokenSource::kRegisterMean;
  if (s == "patch_mean") return TokenSource::kPatchMean;
  throw ConfigError("unknown token source '" + s + "' (global|register_mean|patch_mean)");
}

/// One representation vector per sample, [batch, dim], read from the
/// single-modality joint pass of modality m.
inline Tensor probe_features(const EncodedPair& pair, Modality m, TokenSource source) {
  const SequenceLayout& L = pair.layout;
  switch (source) {
    case TokenSource::kGlobal:
      if (!L.has_global) throw ConfigError("probe_features: model has no global token");
      return pair.g(m);
    case TokenSource::kRegisterMean: {
      if (L.registers == 0) throw ConfigError("probe_features: register_mean needs n_reg > 0");
      const std::size_t first = L.has_global ? 1 : 0;
      return ops::segment_mean_rows(pair.h(m), L.length(m), first, first + L.registers);
    }
    case TokenSource::kPatchMean:
      return pooled_repr(pair, m);
  }
  throw ParameterError("probe_features: unknown source");
}

}  // namespace cavsync

#endif  // CAVSYNC_DOWNSTREAM_PROBE_HPP_
