#pragma once

#include "armada/util.hpp"

#include <condition_variable>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace armada {

// ---------------------------------------------------------------------------
// In-process message broker: named queues with durability, per-consumer
// delivery tracking, acknowledgment, redelivery, and a per-queue append-only
// journal. Every inter-component interaction in the engine rides on this.
//
// Journal format, one record per line:
//   <delivery_tag> <acked:0|1> <base64 payload>
// Replay keeps the publications that have no matching acked record.
// ---------------------------------------------------------------------------

class UnknownQueue : public Error {
public:
    explicit UnknownQueue(const std::string& name) : Error("UnknownQueue", name) {}
};

class SettingsMismatch : public Error {
public:
    explicit SettingsMismatch(const std::string& name)
        : Error("SettingsMismatch", name + " re-declared with different durability") {}
};

class UnknownTag : public Error {
public:
    UnknownTag(const std::string& queue, std::uint64_t tag)
        : Error("UnknownTag", queue + ": tag " + std::to_string(tag) +
                                  " is not outstanding for this consumer") {}
};

struct QueueHandle {
    std::string name;
    bool durable = false;
    std::size_t depth = 0;  // messages not yet acked (ready + delivered-unacked)
};

struct MessageEnvelope {
    std::uint64_t delivery_tag = 0;
    std::string payload;
    bool redelivered = false;
};

struct QueueStats {
    std::size_t depth = 0;
    std::uint64_t published = 0;
    std::uint64_t acked = 0;
    std::uint64_t redelivered = 0;
};

class Broker;

// A consumer is bound to one queue. Messages it consumed but has not acked
// are invisible to other consumers until it nacks them, disconnects, or its
// lease expires.
class Consumer {
public:
    Consumer() = default;
    Consumer(Consumer&& o) noexcept { *this = std::move(o); }
    Consumer& operator=(Consumer&& o) noexcept;
    Consumer(const Consumer&) = delete;
    Consumer& operator=(const Consumer&) = delete;
    ~Consumer() { disconnect(); }

    std::vector<MessageEnvelope> consume(std::size_t batch_limit, double timeout_s = 0.0);
    void ack(std::uint64_t delivery_tag);
    void nack(std::uint64_t delivery_tag);
    void disconnect();
    bool connected() const { return broker_ != nullptr; }

private:
    friend class Broker;
    Consumer(Broker* b, std::string queue, std::uint64_t id)
        : broker_(b), queue_(std::move(queue)), id_(id) {}

    Broker* broker_ = nullptr;
    std::string queue_;
    std::uint64_t id_ = 0;
};

class Broker {
public:
    struct Options {
        std::string journal_dir;    // empty: durable queues keep no on-disk journal
        double lease_seconds = 30;  // consumer lease; expiry requeues unacked messages
    };

    Broker() = default;
    explicit Broker(Options opt) : opt_(std::move(opt)) {
        if (!opt_.journal_dir.empty()) std::filesystem::create_directories(opt_.journal_dir);
    }
    ~Broker() {
        std::lock_guard lk(mu_);
        for (auto& [name, q] : queues_)
            if (q->journal) std::fclose(q->journal);
    }
    Broker(const Broker&) = delete;
    Broker& operator=(const Broker&) = delete;

    // Idempotent: re-declaring returns the existing queue; the durable flag
    // must match. Durable queues with a journal dir replay surviving
    // messages from disk.
    QueueHandle declare_queue(const std::string& name, bool durable) {
        std::lock_guard lk(mu_);
        auto it = queues_.find(name);
        if (it != queues_.end()) {
            if (it->second->durable != durable) throw SettingsMismatch(name);
            return handle_locked(*it->second);
        }
        auto q = std::make_unique<Queue>();
        q->name = name;
        q->durable = durable;
        if (durable && !opt_.journal_dir.empty()) {
            q->journal_path = opt_.journal_dir + "/" + name + ".journal";
            replay_journal(*q);
            q->journal = std::fopen(q->journal_path.c_str(), "ab");
            if (!q->journal) throw Error("JournalError", "cannot open " + q->journal_path);
        }
        auto& ref = *q;
        queues_[name] = std::move(q);
        return handle_locked(ref);
    }

    std::uint64_t publish(const std::string& queue, std::string payload) {
        std::unique_lock lk(mu_);
        Queue& q = lookup(queue);
        std::uint64_t tag = q.next_tag++;
        if (q.journal) append_journal(q, tag, false, payload);
        q.ready.push_back({tag, std::move(payload), false});
        ++q.published;
        q.cv.notify_one();
        return tag;
    }

    Consumer consumer(const std::string& queue) {
        std::lock_guard lk(mu_);
        Queue& q = lookup(queue);
        std::uint64_t id = next_consumer_++;
        q.consumers[id] = {mono_now() + opt_.lease_seconds, {}};
        return Consumer(this, queue, id);
    }

    std::map<std::string, QueueStats> stats() {
        std::lock_guard lk(mu_);
        std::map<std::string, QueueStats> out;
        for (auto& [name, q] : queues_) {
            sweep_expired(*q);
            out[name] = {q->ready.size() + q->unacked.size(), q->published, q->acked,
                         q->redelivered_count};
        }
        return out;
    }

    QueueStats queue_stats(const std::string& queue) {
        std::lock_guard lk(mu_);
        Queue& q = lookup(queue);
        sweep_expired(q);
        return {q.ready.size() + q.unacked.size(), q.published, q.acked, q.redelivered_count};
    }

    std::size_t depth(const std::string& queue) { return queue_stats(queue).depth; }

private:
    friend class Consumer;

    struct Unacked {
        std::uint64_t consumer = 0;
        MessageEnvelope msg;
    };

    struct ConsumerState {
        double lease_deadline = 0;
        std::set<std::uint64_t> tags;
    };

    struct Queue {
        std::string name;
        bool durable = false;
        std::deque<MessageEnvelope> ready;
        std::map<std::uint64_t, Unacked> unacked;  // keyed by tag, ordered
        std::map<std::uint64_t, ConsumerState> consumers;
        std::uint64_t next_tag = 1;
        std::uint64_t published = 0;
        std::uint64_t acked = 0;
        std::uint64_t redelivered_count = 0;
        std::string journal_path;
        std::FILE* journal = nullptr;
        std::condition_variable cv;
    };

    QueueHandle handle_locked(const Queue& q) const {
        return {q.name, q.durable, q.ready.size() + q.unacked.size()};
    }

    Queue& lookup(const std::string& name) {
        auto it = queues_.find(name);
        if (it == queues_.end()) throw UnknownQueue(name);
        return *it->second;
    }

    void append_journal(Queue& q, std::uint64_t tag, bool acked, const std::string& payload) {
        std::string line = std::to_string(tag) + (acked ? " 1 " : " 0 ") + base64_encode(payload);
        line.push_back('\n');
        std::fwrite(line.data(), 1, line.size(), q.journal);
        std::fflush(q.journal);
    }

    void replay_journal(Queue& q) {
        std::FILE* f = std::fopen(q.journal_path.c_str(), "rb");
        if (!f) return;
        std::map<std::uint64_t, std::string> live;  // tag -> payload, ordered
        char buf[1 << 16];
        std::string carry;
        while (std::fgets(buf, sizeof buf, f)) {
            carry += buf;
            if (carry.empty() || carry.back() != '\n') continue;  // partial (truncated) line
            carry.pop_back();
            std::size_t sp1 = carry.find(' ');
            std::size_t sp2 = carry.find(' ', sp1 + 1);
            if (sp1 == std::string::npos || sp2 == std::string::npos) {
                carry.clear();
                continue;
            }
            std::uint64_t tag = std::stoull(carry.substr(0, sp1));
            char flag = carry[sp1 + 1];
            if (flag == '0')
                live[tag] = base64_decode(carry.substr(sp2 + 1));
            else
                live.erase(tag);
            q.next_tag = std::max(q.next_tag, tag + 1);
            carry.clear();
        }
        std::fclose(f);
        for (auto& [tag, payload] : live) q.ready.push_back({tag, std::move(payload), false});
        q.published += q.ready.size();
    }

    // Consumers whose lease lapsed release their unacked messages back to the
    // head of the queue, marked redelivered.
    void sweep_expired(Queue& q) {
        double now = mono_now();
        for (auto it = q.consumers.begin(); it != q.consumers.end();) {
            if (it->second.lease_deadline < now)
                it = release_consumer(q, it);
            else
                ++it;
        }
    }

    std::map<std::uint64_t, ConsumerState>::iterator release_consumer(
        Queue& q, std::map<std::uint64_t, ConsumerState>::iterator it) {
        std::vector<MessageEnvelope> back;
        for (std::uint64_t tag : it->second.tags) {
            auto u = q.unacked.find(tag);
            if (u == q.unacked.end()) continue;
            MessageEnvelope m = std::move(u->second.msg);
            m.redelivered = true;
            back.push_back(std::move(m));
            q.unacked.erase(u);
        }
        // Requeue at the head in tag order so single-consumer FIFO holds.
        for (auto rit = back.rbegin(); rit != back.rend(); ++rit) {
            ++q.redelivered_count;
            q.ready.push_front(std::move(*rit));
        }
        if (!back.empty()) q.cv.notify_all();
        return q.consumers.erase(it);
    }

    std::vector<MessageEnvelope> consume(const std::string& queue, std::uint64_t consumer_id,
                                         std::size_t limit, double timeout_s) {
        std::unique_lock lk(mu_);
        Queue& q = lookup(queue);
        sweep_expired(q);
        auto cit = q.consumers.find(consumer_id);
        if (cit == q.consumers.end()) throw Error("StaleConsumer", queue + ": lease expired");
        cit->second.lease_deadline = mono_now() + opt_.lease_seconds;

        if (q.ready.empty() && timeout_s > 0) {
            q.cv.wait_for(lk, std::chrono::duration<double>(timeout_s),
                          [&] { return !q.ready.empty(); });
            cit = q.consumers.find(consumer_id);
            if (cit == q.consumers.end()) throw Error("StaleConsumer", queue + ": lease expired");
        }

        std::vector<MessageEnvelope> out;
        while (!q.ready.empty() && out.size() < limit) {
            MessageEnvelope m = std::move(q.ready.front());
            q.ready.pop_front();
            q.unacked[m.delivery_tag] = {consumer_id, m};
            cit->second.tags.insert(m.delivery_tag);
            out.push_back(std::move(m));
        }
        return out;
    }

    void ack(const std::string& queue, std::uint64_t consumer_id, std::uint64_t tag) {
        std::lock_guard lk(mu_);
        Queue& q = lookup(queue);
        auto u = q.unacked.find(tag);
        if (u == q.unacked.end() || u->second.consumer != consumer_id)
            throw UnknownTag(queue, tag);
        if (q.journal) append_journal(q, tag, true, u->second.msg.payload);
        auto cit = q.consumers.find(consumer_id);
        if (cit != q.consumers.end()) cit->second.tags.erase(tag);
        q.unacked.erase(u);
        ++q.acked;
    }

    void nack(const std::string& queue, std::uint64_t consumer_id, std::uint64_t tag) {
        std::lock_guard lk(mu_);
        Queue& q = lookup(queue);
        auto u = q.unacked.find(tag);
        if (u == q.unacked.end() || u->second.consumer != consumer_id)
            throw UnknownTag(queue, tag);
        MessageEnvelope m = std::move(u->second.msg);
        m.redelivered = true;
        auto cit = q.consumers.find(consumer_id);
        if (cit != q.consumers.end()) cit->second.tags.erase(tag);
        q.unacked.erase(u);
        ++q.redelivered_count;
        q.ready.push_back(std::move(m));  // nack requeues at the tail
        q.cv.notify_one();
    }

    void disconnect(const std::string& queue, std::uint64_t consumer_id) {
        std::lock_guard lk(mu_);
        auto qit = queues_.find(queue);
        if (qit == queues_.end()) return;
        auto cit = qit->second->consumers.find(consumer_id);
        if (cit != qit->second->consumers.end()) release_consumer(*qit->second, cit);
    }

    Options opt_;
    std::mutex mu_;
    std::map<std::string, std::unique_ptr<Queue>> queues_;
    std::uint64_t next_consumer_ = 1;
};

inline Consumer& Consumer::operator=(Consumer&& o) noexcept {
    if (this != &o) {
        disconnect();
        broker_ = o.broker_;
        queue_ = std::move(o.queue_);
        id_ = o.id_;
        o.broker_ = nullptr;
    }
    return *this;
}

inline std::vector<MessageEnvelope> Consumer::consume(std::size_t batch_limit, double timeout_s) {
    if (!broker_) throw Error("StaleConsumer", "consumer is disconnected");
    return broker_->consume(queue_, id_, batch_limit, timeout_s);
}

inline void Consumer::ack(std::uint64_t tag) {
    if (!broker_) throw Error("StaleConsumer", "consumer is disconnected");
    broker_->ack(queue_, id_, tag);
}

inline void Consumer::nack(std::uint64_t tag) {
    if (!broker_) throw Error("StaleConsumer", "consumer is disconnected");
    broker_->nack(queue_, id_, tag);
}

inline void Consumer::disconnect() {
    if (broker_) {
        broker_->disconnect(queue_, id_);
        broker_ = nullptr;
    }
}

}  // namespace armada
