#pragma once

#include <cstddef>
#include <functional>
#include <memory>

namespace ticopd {

/// Runs independent per-agent work, serially or on a fixed-size worker
/// arena. Callers only ever write agent-local slots, so results do not
/// depend on the thread count.
class AgentExecutor {
 public:
  explicit AgentExecutor(int threads = 1);
  ~AgentExecutor();
  AgentExecutor(const AgentExecutor&) = delete;
  AgentExecutor& operator=(const AgentExecutor&) = delete;

  int threads() const { return threads_; }
  void for_each(std::size_t count, const std::function<void(std::size_t)>& body);

 private:
  struct Arena;
  int threads_;
  std::unique_ptr<Arena> arena_;
};

}  // namespace ticopd
