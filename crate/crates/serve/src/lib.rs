//! Interactive three-box game sessions: a human plays Bob over HTTP + JSON
//! against a simulated Alice.
//!
//! Each round Alice's measurement is run when Bob submits his context and is
//! committed with a salted SHA-256 hash; the reveal discloses the salt and the
//! exact committed bytes so the client can check that nothing was recomputed.

pub mod commit;
pub mod http;
pub mod session;

pub use http::{router, serve, ErrorBody};
pub use session::{Phase, ServeError, SessionManager, DEFAULT_IDLE_TIMEOUT};
