// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "vagg/matrix.hpp"

namespace vagg {

using Embedding = std::vector<double>;

/// One still reference plus the K frames of one video.
struct TokenSet {
  Embedding still;
  std::vector<Embedding> frames;
  std::string still_subject;
  std::string video_subject;

  std::size_t dim() const { return still.size(); }
  bool genuine() const { return still_subject == video_subject; }

  /// Throws ValidationError/ShapeError if K == 0, dims disagree, or a value is
  /// not finite.
  void validate() const;
};

/// One enrolled identity: a still embedding and one video.
struct Subject {
  std::string id;
  Embedding still;
  std::vector<Embedding> frames;
  /// Per-frame corruption flag from the generator; empty when unknown.
  std::vector<bool> corrupted;

  friend bool operator==(const Subject&, const Subject&) = default;
};

using Dataset = std::vector<Subject>;

/// Pairs `still_owner`'s still with `video_owner`'s frames.
TokenSet make_token_set(const Subject& still_owner, const Subject& video_owner);

/// Row 0 = still, rows 1..K = frames in order.
Matrix assemble_tokens(const TokenSet& ts);

/// Inverse of assemble_tokens (subject labels are left empty).
TokenSet disassemble_tokens(const Matrix& tokens);

}  // namespace vagg
