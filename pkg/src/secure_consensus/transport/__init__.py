"""Message delivery: wire framing, simulated network, and socket transport."""

from .wire import MsgType, Packet, decode_packet, encode_packet

__all__ = ["MsgType", "Packet", "decode_packet", "encode_packet"]
