//! WebSocket messages: one JSON object per text frame, tagged by `type`.

use balance_core::trial::TerminationCause;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClientMessage {
    /// First message of every client. `index` (1-based) picks a subject slot;
    /// otherwise the first free slot is assigned.
    Hello {
        subject: String,
        session: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        index: Option<u8>,
    },
    /// Pointer position; `tick` is the last state tick the client saw.
    Mouse { tick: u64, px: i32 },
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ServerMessage {
    /// Accepted hello; `index` is the subject slot (1-based).
    Welcome { index: u8, subjects: u8 },
    /// Seconds left before the simulation starts.
    Countdown { n: u32 },
    /// Pixel positions of the thick (tip) and thin (base) lines.
    State { tick: u64, tips: Vec<i32>, bases: Vec<i32> },
    End { cause: TerminationCause },
    /// The request was refused; the connection closes.
    Error { message: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shapes() {
        let m: ClientMessage = serde_json::from_str(r#"{"type":"mouse","tick":12,"px":600}"#).unwrap();
        assert_eq!(m, ClientMessage::Mouse { tick: 12, px: 600 });
        let h: ClientMessage = serde_json::from_str(r#"{"type":"hello","subject":"A","session":"x1"}"#).unwrap();
        assert_eq!(h, ClientMessage::Hello { subject: "A".into(), session: "x1".into(), index: None });
        assert_eq!(serde_json::to_string(&ClientMessage::Abort).unwrap(), r#"{"type":"abort"}"#);
        let s = ServerMessage::State { tick: 0, tips: vec![601], bases: vec![581] };
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"type":"state","tick":0,"tips":[601],"bases":[581]}"#);
        let e = ServerMessage::End { cause: TerminationCause::ClientLost };
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"type":"end","cause":"client-lost"}"#);
        assert_eq!(serde_json::to_string(&ServerMessage::Countdown { n: 3 }).unwrap(), r#"{"type":"countdown","n":3}"#);
    }

    #[test]
    fn unknown_fields_and_types_rejected() {
        assert!(serde_json::from_str::<ClientMessage>(r#"{"type":"mouse","tick":1,"px":3,"x":1}"#).is_err());
        assert!(serde_json::from_str::<ClientMessage>(r#"{"type":"jump"}"#).is_err());
    }
}
