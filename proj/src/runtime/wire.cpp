// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/runtime/wire.hpp>

#include <edgecloud/bytes.hpp>
#include <edgecloud/error.hpp>

namespace edgecloud::runtime {

std::vector<std::uint8_t> encode_message(const WireMessage &m) {
  ByteWriter w;
  w.bytes("ECWP");
  w.u16(kWireVersion);
  if (const auto *req = std::get_if<InferRequest>(&m)) {
    std::size_t count = req->dims.empty() ? 0 : 1;
    for (auto d : req->dims)
      count *= d;
    if (req->dims.empty() || count != req->payload.size())
      fail(ErrorKind::Protocol, "request payload has " + std::to_string(req->payload.size()) +
                                    " values for dims of " + std::to_string(count));
    w.u8(static_cast<std::uint8_t>(WireVariant::InferRequest));
    w.u64(req->request_id);
    w.u32(static_cast<std::uint32_t>(req->dims.size()));
    for (auto d : req->dims)
      w.u32(d);
    w.f32s(req->payload);
  } else if (const auto *resp = std::get_if<InferResponse>(&m)) {
    w.u8(static_cast<std::uint8_t>(WireVariant::InferResponse));
    w.u64(resp->request_id);
    w.u32(resp->predicted_class);
  } else {
    w.u8(static_cast<std::uint8_t>(WireVariant::Shutdown));
  }
  return w.take();
}

WireMessage decode_message(std::span<const std::uint8_t> frame) {
  ByteReader r(frame, ErrorKind::Protocol, "wire frame");
  r.expect_magic("ECWP");
  const std::size_t version_at = r.offset();
  if (const auto v = r.u16(); v != kWireVersion)
    r.error_at(version_at, "unsupported version " + std::to_string(v));
  const std::size_t variant_at = r.offset();
  const auto variant = r.u8();
  WireMessage out;
  switch (static_cast<WireVariant>(variant)) {
  case WireVariant::InferRequest: {
    InferRequest req;
    req.request_id = r.u64();
    const std::size_t rank_at = r.offset();
    const auto rank = r.u32();
    if (rank == 0 || rank > r.remaining() / 4)
      r.error_at(rank_at, "bad rank " + std::to_string(rank));
    const std::size_t max_count = r.remaining() / 4;
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::size_t dim_at = r.offset();
      const auto d = r.u32();
      if (d == 0)
        r.error_at(dim_at, "zero dimension");
      if (d > max_count / count)
        r.error_at(dim_at, "dimensions exceed frame size");
      count *= d;
      req.dims.push_back(d);
    }
    if (count * 4 != r.remaining())
      r.error_at(r.offset(), "payload has " + std::to_string(r.remaining()) +
                                 " bytes, dims need " + std::to_string(count * 4));
    req.payload = r.f32s(count);
    out = std::move(req);
    break;
  }
  case WireVariant::InferResponse: {
    InferResponse resp;
    resp.request_id = r.u64();
    resp.predicted_class = r.u32();
    out = resp;
    break;
  }
  case WireVariant::Shutdown:
    out = Shutdown{};
    break;
  default:
    r.error_at(variant_at, "unknown variant " + std::to_string(variant));
  }
  r.expect_end();
  return out;
}

} // namespace edgecloud::runtime
