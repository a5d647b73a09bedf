from .agreements import (  # noqa: F401
    AgreementLimitError,
    AgreementTable,
    ApPolicy,
    BroadcastSession,
    NegotiationError,
    SetupCommand,
    TwtAgreement,
    TwtMessage,
    TwtParams,
    negotiate,
    next_wake_time,
    run_dialogue,
    wake_state,
)
from .element import (  # noqa: F401
    ElementDecodeError,
    ElementEncodeError,
    decode_element,
    encode_element,
)
from .scheduling import SessionSlot, build_timeline  # noqa: F401
