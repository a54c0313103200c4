#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "typedom/error.hpp"
#include "typedom/neighbourhood.hpp"

namespace typedom {

struct HttpScorerOptions {
  std::size_t batch_size = 32;
  std::size_t concurrency = 8;
  int retries = 3;
  std::chrono::milliseconds timeout{30000};
  std::chrono::milliseconds backoff{200};
};

// Client for an NLI scoring service speaking
//   POST /score_batch {"items":[{"premise","hypothesis"}]}
//     -> {"results":[{"entailment","neutral","contradiction"}]}
// Batches are sent by up to `concurrency` workers; results are placed by
// query index so the output order never depends on scheduling.
class HttpScorer : public ContradictionScorer {
 public:
  explicit HttpScorer(std::string base_url, HttpScorerOptions opts = {})
      : url_(std::move(base_url)), opts_(opts) {
    if (opts_.batch_size == 0 || opts_.concurrency == 0) {
      throw Error(ErrorKind::usage, "batch size and concurrency must be positive");
    }
  }

  std::vector<NLIProbabilities> score(std::span<const NLIQuery> queries) override {
    std::vector<NLIProbabilities> out(queries.size());
    const std::size_t n_batches = (queries.size() + opts_.batch_size - 1) / opts_.batch_size;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;

    auto worker = [&] {
      httplib::Client client(url_);
      client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(opts_.timeout));
      client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(opts_.timeout));
      for (std::size_t b = next++; b < n_batches; b = next++) {
        {
          std::lock_guard lock(failure_mu);
          if (failure) return;
        }
        const std::size_t lo = b * opts_.batch_size;
        const std::size_t hi = std::min(queries.size(), lo + opts_.batch_size);
        try {
          auto results = send_batch(client, queries.subspan(lo, hi - lo));
          std::copy(results.begin(), results.end(), out.begin() + static_cast<std::ptrdiff_t>(lo));
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    };

    const std::size_t n_workers = std::min(opts_.concurrency, std::max<std::size_t>(n_batches, 1));
    std::vector<std::thread> threads;
    for (std::size_t i = 1; i < n_workers; ++i) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
  }

 private:
  std::vector<NLIProbabilities> send_batch(httplib::Client& client, std::span<const NLIQuery> batch) const {
    nlohmann::ordered_json body;
    body["items"] = nlohmann::ordered_json::array();
    for (const auto& q : batch) body["items"].push_back({{"premise", q.premise}, {"hypothesis", q.hypothesis}});
    const std::string payload = body.dump();

    std::string last_error;
    const int attempts = std::max(1, opts_.retries + 1);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      auto res = client.Post("/score_batch", payload, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
      } else if (res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
      } else if (res->status != 200) {
        throw Error(ErrorKind::protocol, "scorer rejected a batch with HTTP " + std::to_string(res->status));
      } else {
        return parse_batch(res->body, batch.size());
      }
      if (attempt < attempts) std::this_thread::sleep_for(opts_.backoff * attempt);
    }
    throw Error(ErrorKind::transport, "scorer at " + url_ + " unreachable after " + std::to_string(attempts) +
                                          " attempts (" + std::to_string(attempts - 1) + " retries): " + last_error);
  }

  static std::vector<NLIProbabilities> parse_batch(const std::string& body, std::size_t expected) {
    std::vector<NLIProbabilities> out;
    try {
      auto j = nlohmann::json::parse(body);
      const auto& results = j.at("results");
      if (!results.is_array() || results.size() != expected) {
        throw Error(ErrorKind::protocol, "scorer returned a batch of the wrong length");
      }
      for (const auto& r : results) {
        NLIProbabilities p{r.at("entailment").get<double>(), r.at("neutral").get<double>(),
                           r.at("contradiction").get<double>()};
        check_probabilities(p);
        out.push_back(p);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::protocol, std::string("malformed scorer response: ") + e.what());
    }
    return out;
  }

  std::string url_;
  HttpScorerOptions opts_;
};

}  // namespace typedom
