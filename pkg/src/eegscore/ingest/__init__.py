from .osc import (OscBundle, OscMessage, encode_osc_packet, iter_messages,
                  parse_osc_packet, read_replay, write_replay)
from .session import (EEG_ADDRESS, MUSE_LAYOUT, ChannelLayout, SampleFrame, Segment,
                      Session, decode_eeg_message, read_session, write_session)
from .stream import (MARKER_ADDRESS, FrameStream, MarkerEvent, TaggedFrame, frame_stream,
                     marker_message, session_datagrams, start_producer, udp_datagrams)
