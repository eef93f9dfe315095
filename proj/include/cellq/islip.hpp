#pragma once

// iSLIP request-grant-accept matching for an N x N crossbar with rotating
// grant pointers (per output) and accept pointers (per input).  Pointers
// advance only for matches made in the first iteration.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace cellq {

class RequestMatrix {
 public:
  explicit RequestMatrix(int n) : n_(n), req_(static_cast<std::size_t>(n) * n) {
    if (n < 1) throw std::invalid_argument("RequestMatrix: need n >= 1");
  }

  int size() const { return n_; }
  bool at(int i, int j) const { return req_[idx(i, j)] != 0; }
  void set(int i, int j, bool v = true) { req_[idx(i, j)] = v ? 1 : 0; }
  void clear() { std::fill(req_.begin(), req_.end(), std::uint8_t{0}); }

 private:
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(i) * n_ + j;
  }
  int n_;
  std::vector<std::uint8_t> req_;
};

struct IslipState {
  std::vector<int> grant_ptr;   // per output
  std::vector<int> accept_ptr;  // per input
  explicit IslipState(int n) : grant_ptr(n, 0), accept_ptr(n, 0) {}
};

struct Matching {
  std::vector<int> input_to_output;  // -1 when unmatched
  std::vector<int> output_to_input;
  explicit Matching(int n) : input_to_output(n, -1), output_to_input(n, -1) {}

  int size() const {
    int s = 0;
    for (int j : input_to_output) s += (j >= 0);
    return s;
  }
};

inline Matching islip_schedule(const RequestMatrix& req, IslipState& state,
                               int iterations) {
  const int n = req.size();
  if (iterations < 1)
    throw std::invalid_argument("islip_schedule: need iterations >= 1");
  Matching match(n);
  std::vector<int> grant(n);  // output j -> granted input, -1 if none

  for (int iter = 0; iter < iterations; ++iter) {
    // Grant: each unmatched output picks the requesting unmatched input
    // nearest at-or-after its grant pointer.
    bool any_grant = false;
    for (int j = 0; j < n; ++j) {
      grant[j] = -1;
      if (match.output_to_input[j] >= 0) continue;
      for (int k = 0; k < n; ++k) {
        const int i = (state.grant_ptr[j] + k) % n;
        if (match.input_to_output[i] < 0 && req.at(i, j)) {
          grant[j] = i;
          any_grant = true;
          break;
        }
      }
    }
    if (!any_grant) break;

    // Accept: each input with grants takes the granting output nearest
    // at-or-after its accept pointer.
    bool any_match = false;
    for (int i = 0; i < n; ++i) {
      if (match.input_to_output[i] >= 0) continue;
      for (int k = 0; k < n; ++k) {
        const int j = (state.accept_ptr[i] + k) % n;
        if (grant[j] == i) {
          match.input_to_output[i] = j;
          match.output_to_input[j] = i;
          any_match = true;
          if (iter == 0) {
            state.grant_ptr[j] = (i + 1) % n;
            state.accept_ptr[i] = (j + 1) % n;
          }
          break;
        }
      }
    }
    if (!any_match) break;
  }
  return match;
}

inline int default_islip_iterations(int ports) {
  int it = 1;
  while ((1 << it) < ports) ++it;  // ceil(log2 N), at least 1
  return it;
}

}  // namespace cellq
