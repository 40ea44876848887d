#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "xrsel/kde.hpp"
#include "xrsel/pipeline.hpp"
#include "xrsel/selection.hpp"

namespace httplib {
class Server;
}

namespace xrsel {

struct ServiceOptions {
    int grid_resolution = 64;
    double padding = 0.05;
    KdeParams kde;
    std::chrono::seconds idle_timeout{600};
    std::string cors_origin = "*";
};

struct HttpReply {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
    std::map<std::string, std::string> headers;
};

/// Hex SHA-256 of `data`.
std::string sha256_hex(const std::string& data);

/// Session store and request handlers behind the HTTP API. Handlers are
/// callable directly; mount() binds them to routes on an httplib server.
class SelectionService {
public:
    explicit SelectionService(ServiceOptions options = {});
    ~SelectionService();

    SelectionService(const SelectionService&) = delete;
    SelectionService& operator=(const SelectionService&) = delete;

    HttpReply create_session(const std::string& body);
    HttpReply select(const std::string& session_id, const std::string& body);
    HttpReply mesh(const std::string& session_id);
    HttpReply camera(const std::string& session_id, const std::string& head_param);

    void mount(httplib::Server& server);

    std::size_t session_count();
    std::size_t cached_fields();

private:
    struct Session;

    std::shared_ptr<Session> find(const std::string& id);
    void expire_idle();

    ServiceOptions options_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::map<std::string, std::shared_ptr<const DensityField>> field_cache_;
    std::uint64_t next_session_ = 1;
};

}  // namespace xrsel
