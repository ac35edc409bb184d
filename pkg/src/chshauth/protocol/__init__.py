"""Authorization protocol: messages, commitments, state machines, sessions."""
from .adversary import (
    ClassicalTable,
    Fabricate,
    FixedAngles,
    Honest,
    OwnLevelStrategy,
    PooledResource,
    UserBehavior,
    parse_adversary,
)
from .commitment import commit, verify_reveal
from .machines import TIMEOUT, AuthorizerMachine, UserMachine, authorizer_step, user_step
from .session import SessionResult, run_session
from .transcript import GameRecord, Transcript, TranscriptError, params_digest, verify_transcript
