#include "ticopd/executor.hpp"

#include <stdexcept>

#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

namespace ticopd {

struct AgentExecutor::Arena {
  explicit Arena(int threads) : arena(threads) {}
  tbb::task_arena arena;
};

AgentExecutor::AgentExecutor(int threads) : threads_(threads) {
  if (threads < 1) throw std::invalid_argument("thread count must be >= 1");
  if (threads > 1) arena_ = std::make_unique<Arena>(threads);
}

AgentExecutor::~AgentExecutor() = default;

void AgentExecutor::for_each(std::size_t count, const std::function<void(std::size_t)>& body) {
  if (!arena_ || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  arena_->arena.execute([&] {
    tbb::parallel_for(std::size_t{0}, count, [&](std::size_t i) { body(i); });
  });
}

}  // namespace ticopd
