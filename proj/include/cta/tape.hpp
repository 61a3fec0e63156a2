#ifndef CTA_TAPE_HPP_
#define CTA_TAPE_HPP_

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cta/tensor.hpp"

namespace cta {

/// Ordered record of executed operations for reverse-mode differentiation.
///
/// Ops append an entry whenever a tape is active on the calling thread and
/// at least one input requires a gradient. Entries are appended in execution
/// order, so the record is topologically sorted by construction.
class Tape {
 public:
  struct Entry {
    std::string op;
    std::vector<std::shared_ptr<TensorNode>> inputs;
    std::shared_ptr<TensorNode> output;
    std::function<void()> backward;
  };

  void record(Entry entry) { m_entries.push_back(std::move(entry)); }

  /// Propagates d(loss)/d(.) to every recorded input. Leaf grads accumulate
  /// across calls; intermediate grads are reset at the start of each call.
  /// Throws ContractError when loss is not a one-element tensor.
  void backward(const Tensor& loss);

  void clear() { m_entries.clear(); }
  std::size_t size() const { return m_entries.size(); }
  const std::vector<Entry>& entries() const { return m_entries; }

 private:
  std::vector<Entry> m_entries;
};

/// Makes a tape the active recorder for the current thread while in scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* m_previous;
};

/// Disables recording for the current thread while in scope (inference).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* m_previous;
};

Tape* active_tape();

}  // namespace cta

#endif  // CTA_TAPE_HPP_
