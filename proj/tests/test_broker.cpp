#include "armada/broker.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <map>
#include <random>
#include <thread>

using namespace armada;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("armada-test-" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("declare_queue is idempotent and checks settings") {
    Broker b;
    auto h1 = b.declare_queue("pending", true);
    auto h2 = b.declare_queue("pending", true);
    CHECK(h1.name == h2.name);
    CHECK(h1.durable);
    CHECK_THROWS_AS(b.declare_queue("pending", false), SettingsMismatch);
}

TEST_CASE("a fresh broker can declare the engine's dedicated queues") {
    Broker b;
    std::set<std::string> names;
    for (const char* n : {"pending", "done", "sync.enqueue", "ack.enqueue", "sync.dequeue",
                          "ack.dequeue", "dl"})
        names.insert(b.declare_queue(n, true).name);
    CHECK(names.size() == 7);
}

TEST_CASE("publish to an undeclared queue fails") {
    Broker b;
    CHECK_THROWS_AS(b.publish("nope", "x"), UnknownQueue);
}

TEST_CASE("FIFO over 1000 messages matches a reference list") {
    Broker b;
    b.declare_queue("q", false);
    std::vector<std::string> reference;
    for (int i = 0; i < 1000; ++i) {
        reference.push_back("payload-" + std::to_string(i));
        b.publish("q", reference.back());
    }
    auto c = b.consumer("q");
    std::vector<std::string> got;
    while (got.size() < reference.size()) {
        auto batch = c.consume(64);
        for (auto& m : batch) {
            got.push_back(m.payload);
            c.ack(m.delivery_tag);
        }
    }
    CHECK(got == reference);
}

TEST_CASE("ten thousand publishes give depth ten thousand") {
    Broker b;
    b.declare_queue("q", false);
    for (int i = 0; i < 10000; ++i) b.publish("q", "m");
    CHECK(b.depth("q") == 10000);
}

TEST_CASE("consume batching counts down") {
    Broker b;
    b.declare_queue("q", false);
    for (int i = 0; i < 3; ++i) b.publish("q", "m");
    auto c = b.consumer("q");
    CHECK(c.consume(2).size() == 2);
    CHECK(c.consume(2).size() == 1);
    CHECK(c.consume(2).empty());  // empty queue, non-blocking
}

TEST_CASE("unacked messages are invisible until the consumer disconnects") {
    Broker b;
    b.declare_queue("q", false);
    b.publish("q", "the-payload");

    auto a = b.consumer("q");
    auto got = a.consume(1);
    REQUIRE(got.size() == 1);
    CHECK_FALSE(got[0].redelivered);

    auto c2 = b.consumer("q");
    CHECK(c2.consume(1).empty());  // invisible while A holds it

    a.disconnect();
    auto again = c2.consume(1);
    REQUIRE(again.size() == 1);
    CHECK(again[0].payload == "the-payload");
    CHECK(again[0].redelivered);
}

TEST_CASE("ack removes permanently, nack requeues at the tail") {
    Broker b;
    b.declare_queue("q", false);
    b.publish("q", "a");
    b.publish("q", "b");
    auto c = b.consumer("q");

    auto m = c.consume(1);
    REQUIRE(m.size() == 1);
    c.ack(m[0].delivery_tag);
    CHECK(b.depth("q") == 1);
    CHECK_THROWS_AS(c.ack(m[0].delivery_tag), UnknownTag);  // at-most-once ack

    m = c.consume(1);
    REQUIRE(m.size() == 1);
    CHECK(m[0].payload == "b");
    c.nack(m[0].delivery_tag);
    m = c.consume(1);
    REQUIRE(m.size() == 1);
    CHECK(m[0].payload == "b");
    CHECK(m[0].redelivered);
}

TEST_CASE("lease expiry releases unacked messages") {
    Broker b(Broker::Options{.journal_dir = "", .lease_seconds = 0.05});
    b.declare_queue("q", false);
    b.publish("q", "m");
    auto a = b.consumer("q");
    REQUIRE(a.consume(1).size() == 1);
    std::this_thread::sleep_for(std::chrono::milliseconds(80));
    auto c2 = b.consumer("q");
    auto got = c2.consume(1);
    REQUIRE(got.size() == 1);
    CHECK(got[0].redelivered);
}

TEST_CASE("durable queues survive a broker kill with payloads intact") {
    TempDir dir;
    std::map<std::uint64_t, std::string> outstanding;
    {
        Broker b(Broker::Options{.journal_dir = dir.path.string()});
        b.declare_queue("q", true);
        for (int i = 0; i < 50; ++i) {
            std::string payload(1 + i % 7, char('a' + i % 26));
            payload += "\xff\x01 binary-ish " + std::to_string(i);
            auto tag = b.publish("q", payload);
            outstanding[tag] = payload;
        }
        auto c = b.consumer("q");
        for (auto& m : c.consume(20)) {
            c.ack(m.delivery_tag);
            outstanding.erase(m.delivery_tag);
        }
        // Broker object destroyed without graceful drain: a kill.
    }
    Broker b2(Broker::Options{.journal_dir = dir.path.string()});
    b2.declare_queue("q", true);
    auto c = b2.consumer("q");
    std::map<std::uint64_t, std::string> recovered;
    for (auto& m : c.consume(1000)) recovered[m.delivery_tag] = m.payload;
    CHECK(recovered == outstanding);
}

TEST_CASE("randomized consume/nack/disconnect schedules lose and duplicate nothing") {
    std::mt19937 rng(1234);
    Broker b;
    b.declare_queue("q", false);
    const int n = 2000;
    std::multiset<std::string> reference;
    for (int i = 0; i < n; ++i) {
        std::string p = "m" + std::to_string(i);
        reference.insert(p);
        b.publish("q", p);
    }

    std::multiset<std::string> acked;
    std::vector<Consumer> consumers;
    for (int i = 0; i < 4; ++i) consumers.push_back(b.consumer("q"));

    while (acked.size() < std::size_t(n)) {
        auto& c = consumers[rng() % consumers.size()];
        if (!c.connected()) {
            c = b.consumer("q");
            continue;
        }
        auto batch = c.consume(1 + rng() % 8);
        for (auto& m : batch) {
            switch (rng() % 4) {
                case 0: c.nack(m.delivery_tag); break;
                case 1:
                    c.disconnect();  // drops the rest of the batch too
                    break;
                default:
                    acked.insert(m.payload);
                    c.ack(m.delivery_tag);
                    break;
            }
            if (!c.connected()) break;
        }
    }
    CHECK(acked == reference);  // at-least-once, acked exactly once each
    CHECK(b.depth("q") == 0);
}

TEST_CASE("blocking consume wakes on publish") {
    Broker b;
    b.declare_queue("q", false);
    auto c = b.consumer("q");
    std::thread t([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        b.publish("q", "late");
    });
    auto start = mono_now();
    auto got = c.consume(1, 2.0);
    t.join();
    REQUIRE(got.size() == 1);
    CHECK(mono_now() - start < 1.0);
}

TEST_CASE("statistics expose per-queue counters") {
    Broker b;
    b.declare_queue("q", false);
    b.publish("q", "a");
    b.publish("q", "b");
    auto c = b.consumer("q");
    auto m = c.consume(1);
    c.ack(m[0].delivery_tag);
    m = c.consume(1);
    c.nack(m[0].delivery_tag);
    auto st = b.stats().at("q");
    CHECK(st.published == 2);
    CHECK(st.acked == 1);
    CHECK(st.redelivered == 1);
    CHECK(st.depth == 1);
}
