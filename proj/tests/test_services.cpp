#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "expflow/services.hpp"
#include "expflow/yaml_parser.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace expflow;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("expflow-svc-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::unique_ptr<Service> metrics_service(const std::string& name) {
    ServiceSpec spec;
    spec.name = name;
    spec.kind = BehaviorKind::metrics_logger;
    std::vector<ServiceSpec> specs = {spec};
    auto services = make_services(specs);
    return std::move(services[0]);
}

std::unique_ptr<Service> notifier_service(const std::string& name,
                                          const std::string& url,
                                          const std::string& retry_ms = "10") {
    ServiceSpec spec;
    spec.name = name;
    spec.kind = BehaviorKind::webhook_notifier;
    spec.config = {{"url", url}, {"retry_delay_ms", retry_ms}};
    std::vector<ServiceSpec> specs = {spec};
    auto services = make_services(specs);
    return std::move(services[0]);
}

// Records lifecycle calls in a shared journal; can refuse to start.
class JournalService : public Service {
public:
    JournalService(std::string name, std::vector<std::string>* journal,
                   bool fail_start = false)
        : name_(std::move(name)), journal_(journal), fail_start_(fail_start) {}
    const std::string& name() const override { return name_; }
    void start(const fs::path&) override {
        if (fail_start_)
            throw Error(Errc::service_start_failed, name_ + " refused");
        journal_->push_back("start " + name_);
    }
    StopReport stop() override {
        journal_->push_back("stop " + name_);
        return StopReport{name_, false, 0, 0};
    }

private:
    std::string name_;
    std::vector<std::string>* journal_;
    bool fail_start_;
};

// Minimal local webhook receiver.
struct TestServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::vector<std::string> bodies;
    std::mutex mu;
    std::atomic<int> fail_next{0};

    TestServer() {
        server.Post("/hook", [this](const httplib::Request& req,
                                    httplib::Response& res) {
            std::lock_guard lock(mu);
            if (fail_next > 0) {
                --fail_next;
                res.status = 500;
                return;
            }
            bodies.push_back(req.body);
            res.status = 200;
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        while (!server.is_running())
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    ~TestServer() {
        server.stop();
        thread.join();
    }
    std::string url() const {
        return "http://127.0.0.1:" + std::to_string(port) + "/hook";
    }
};

} // namespace

TEST_CASE("make_services rejects non-service kinds before starting anything") {
    ServiceSpec spec;
    spec.name = "oops";
    spec.kind = BehaviorKind::stage_executor;
    try {
        make_services({spec});
        FAIL("expected ServiceStartError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::service_start_failed);
    }
}

TEST_CASE("collect_service_specs reads configs from the document") {
    TypeRegistry registry = TypeRegistry::with_builtins();
    ResolvedDocument doc = resolve(
        parse_spec("track: !MetricsLogger\n  flush: fast\n"
                   "ping: !WebhookNotifier\n  url: http://x/\n"
                   "s: !Stage\n  script: [true]\n",
                   "t"),
        registry, {});
    std::vector<ServiceSpec> specs =
        collect_service_specs(doc, registry, {"track", "ping"});
    REQUIRE(specs.size() == 2);
    CHECK(specs[0].kind == BehaviorKind::metrics_logger);
    CHECK(specs[0].config.at("flush") == "fast");
    CHECK(specs[1].kind == BehaviorKind::webhook_notifier);
    CHECK(specs[1].config.at("url") == "http://x/");

    SUBCASE("undefined service name") {
        CHECK_THROWS_AS(collect_service_specs(doc, registry, {"ghost"}), Error);
    }
    SUBCASE("stage is not a service") {
        try {
            collect_service_specs(doc, registry, {"s"});
            FAIL("expected ServiceStartError");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::service_start_failed);
        }
    }
}

TEST_CASE("metrics land in metrics.jsonl in FIFO order") {
    fs::path dir = fresh_dir("metrics");
    auto svc = metrics_service("track");
    svc->start(dir);
    for (int i = 0; i < 5; ++i)
        svc->log_metric(MetricsEvent{"loss", i, 1.0 / (i + 1), ""});
    StopReport report = svc->stop();
    CHECK_FALSE(report.timed_out);
    CHECK(report.dropped == 0);
    CHECK(report.delivered == 5);

    std::vector<std::string> lines = read_lines(dir / "metrics.jsonl");
    REQUIRE(lines.size() == 5);
    for (int i = 0; i < 5; ++i) {
        json j = json::parse(lines[i]);
        CHECK(j["name"] == "loss");
        CHECK(j["step"] == i);
        CHECK(j["value"] == doctest::Approx(1.0 / (i + 1)));
        CHECK(j["ts"].get<std::string>().size() >= 20);
    }
}

TEST_CASE("non-finite metric values are rejected") {
    fs::path dir = fresh_dir("nan");
    auto svc = metrics_service("track");
    svc->start(dir);
    try {
        svc->log_metric(MetricsEvent{"loss", 0, std::nan(""), ""});
        FAIL("expected InvalidMetricError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::invalid_metric);
    }
    CHECK_THROWS_AS(
        svc->log_metric(MetricsEvent{"loss", 0,
                                     std::numeric_limits<double>::infinity(), ""}),
        Error);
    svc->stop();
    CHECK(read_lines(dir / "metrics.jsonl").empty());
}

TEST_CASE("stop drains a burst of 100 queued events completely") {
    fs::path dir = fresh_dir("drain");
    auto svc = metrics_service("track");
    svc->start(dir);
    for (int i = 0; i < 100; ++i)
        svc->log_metric(MetricsEvent{"m", i, double(i), ""});
    StopReport report = svc->stop();
    CHECK_FALSE(report.timed_out);
    CHECK(report.delivered == 100);
    CHECK(read_lines(dir / "metrics.jsonl").size() == 100);
}

TEST_CASE("stages can feed metrics through metrics.inbox") {
    fs::path dir = fresh_dir("inbox");
    auto svc = metrics_service("track");
    svc->start(dir);
    {
        std::ofstream inbox(dir / "metrics.inbox", std::ios::app);
        inbox << R"({"name":"acc","step":1,"value":0.9})" << '\n';
        inbox << "this is not json\n";
        inbox << R"({"name":"acc","step":2,"value":0.95})" << '\n';
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(120));
    svc->stop();
    std::vector<std::string> lines = read_lines(dir / "metrics.jsonl");
    REQUIRE(lines.size() == 2);
    CHECK(json::parse(lines[0])["value"] == doctest::Approx(0.9));
    CHECK(json::parse(lines[1])["step"] == 2);
}

TEST_CASE("non-monotone steps warn instead of failing") {
    fs::path dir = fresh_dir("steps");
    auto svc = metrics_service("track");
    svc->start(dir);
    svc->log_metric(MetricsEvent{"loss", 5, 0.5, ""});
    CHECK_NOTHROW(svc->log_metric(MetricsEvent{"loss", 3, 0.4, ""}));
    StopReport report = svc->stop();
    CHECK(report.delivered == 2); // both still recorded
}

TEST_CASE("webhook posts the event envelope") {
    fs::path dir = fresh_dir("hook");
    TestServer server;
    auto svc = notifier_service("ping", server.url());
    svc->start(dir);
    Notification n;
    n.event = NotifyEvent::run_finished;
    n.run_id = "20260101T000000Zabcd";
    n.payload = {{"pipeline", "main"}, {"status", "ok"}};
    svc->notify(n);
    StopReport report = svc->stop();
    CHECK(report.delivered == 1);
    REQUIRE(server.bodies.size() == 1);
    json body = json::parse(server.bodies[0]);
    CHECK(body["event"] == "run_finished");
    CHECK(body["run_id"] == "20260101T000000Zabcd");
    CHECK(body["payload"]["pipeline"] == "main");
    CHECK(body["payload"]["status"] == "ok");
}

TEST_CASE("webhook retries once after a failed delivery") {
    fs::path dir = fresh_dir("retry");
    TestServer server;
    server.fail_next = 1;
    auto svc = notifier_service("ping", server.url());
    svc->start(dir);
    svc->notify(Notification{NotifyEvent::run_started, "r1", {}});
    svc->stop();
    REQUIRE(server.bodies.size() == 1);
    std::string log;
    for (const auto& line : read_lines(dir / "services.log")) log += line + "\n";
    CHECK(log.find("delivered after retry") != std::string::npos);
}

TEST_CASE("unreachable webhook never throws") {
    fs::path dir = fresh_dir("unreachable");
    auto svc = notifier_service("ping", "http://127.0.0.1:9/hook");
    svc->start(dir);
    CHECK_NOTHROW(svc->notify(Notification{NotifyEvent::run_started, "r1", {}}));
    StopReport report = svc->stop();
    CHECK(report.delivered == 1); // attempted, not successful
    std::string log;
    for (const auto& line : read_lines(dir / "services.log")) log += line + "\n";
    CHECK(log.find("delivery failed") != std::string::npos);
}

TEST_CASE("notifier without a url fails to start") {
    ServiceSpec spec;
    spec.name = "ping";
    spec.kind = BehaviorKind::webhook_notifier;
    std::vector<ServiceSpec> specs = {spec};
    auto services = make_services(specs);
    try {
        services[0]->start(fresh_dir("nourl"));
        FAIL("expected ServiceStartError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::service_start_failed);
    }
}

TEST_CASE("group starts in order and stops in reverse") {
    std::vector<std::string> journal;
    std::vector<std::unique_ptr<Service>> services;
    services.push_back(std::make_unique<JournalService>("a", &journal));
    services.push_back(std::make_unique<JournalService>("b", &journal));
    ServiceGroup group(std::move(services));
    group.start_all(fresh_dir("order"));
    std::vector<StopReport> reports = group.stop_all();
    CHECK(journal ==
          std::vector<std::string>{"start a", "start b", "stop b", "stop a"});
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].service == "b");

    SUBCASE("second stop is a no-op") {
        CHECK(group.stop_all().empty());
    }
}

TEST_CASE("start failure rolls back already-started services") {
    std::vector<std::string> journal;
    std::vector<std::unique_ptr<Service>> services;
    services.push_back(std::make_unique<JournalService>("a", &journal));
    services.push_back(std::make_unique<JournalService>("boom", &journal, true));
    services.push_back(std::make_unique<JournalService>("c", &journal));
    ServiceGroup group(std::move(services));
    try {
        group.start_all(fresh_dir("rollback"));
        FAIL("expected ServiceStartError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::service_start_failed);
        std::string msg = e.what();
        CHECK(msg.find("boom") != std::string::npos);
    }
    CHECK(journal == std::vector<std::string>{"start a", "stop a"});
    CHECK_FALSE(group.started());
}

TEST_CASE("queue overflow drops instead of blocking") {
    fs::path dir = fresh_dir("overflow");
    auto svc = metrics_service("track");
    svc->start(dir);
    // More than the queue bound; the worker drains concurrently so we only
    // assert conservation: delivered + dropped == enqueued attempts.
    const int total = 12000;
    for (int i = 0; i < total; ++i)
        svc->log_metric(MetricsEvent{"m", i, double(i), ""});
    StopReport report = svc->stop();
    CHECK(report.delivered + report.dropped == static_cast<size_t>(total));
    CHECK(read_lines(dir / "metrics.jsonl").size() == report.delivered);
}
