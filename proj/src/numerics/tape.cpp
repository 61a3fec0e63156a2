#include "cta/tape.hpp"

#include <algorithm>

#include "cta/errors.hpp"

namespace cta {

namespace {
thread_local Tape* t_active = nullptr;
}

Tape* active_tape() { return t_active; }

TapeScope::TapeScope(Tape& tape) : m_previous(t_active) { t_active = &tape; }
TapeScope::~TapeScope() { t_active = m_previous; }

NoGradScope::NoGradScope() : m_previous(t_active) { t_active = nullptr; }
NoGradScope::~NoGradScope() { t_active = m_previous; }

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  for (Entry& e : m_entries) {
    std::fill(e.output->grad.begin(), e.output->grad.end(), 0.0);
  }
  TensorNode* root = loss.node().get();
  if (!root->requires_grad) return;
  root->grad[0] += 1.0;
  for (auto it = m_entries.rbegin(); it != m_entries.rend(); ++it) {
    it->backward();
  }
}

}  // namespace cta
