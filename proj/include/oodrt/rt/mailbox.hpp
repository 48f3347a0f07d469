#pragma once

// Single-slot latest-value mailbox: a put overwrites an unread value and
// counts it as dropped, so a slow consumer only ever sees the newest item.

#include <condition_variable>
#include <mutex>
#include <optional>

namespace oodrt::rt {

template <class T>
class LatestMailbox {
public:
    void put(T v) {
        {
            std::lock_guard lk(mu_);
            if (slot_) ++drops_;
            slot_ = std::move(v);
        }
        cv_.notify_one();
    }

    std::optional<T> try_take() {
        std::lock_guard lk(mu_);
        return take_locked();
    }

    // Blocks until a value arrives; empty once closed and drained.
    std::optional<T> wait_take() {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return slot_.has_value() || closed_; });
        return take_locked();
    }

    void close() {
        {
            std::lock_guard lk(mu_);
            closed_ = true;
        }
        cv_.notify_all();
    }

    bool has_value() const {
        std::lock_guard lk(mu_);
        return slot_.has_value();
    }
    std::size_t drops() const {
        std::lock_guard lk(mu_);
        return drops_;
    }

private:
    std::optional<T> take_locked() {
        std::optional<T> out = std::move(slot_);
        slot_.reset();
        return out;
    }

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::optional<T> slot_;
    std::size_t drops_ = 0;
    bool closed_ = false;
};

}  // namespace oodrt::rt
