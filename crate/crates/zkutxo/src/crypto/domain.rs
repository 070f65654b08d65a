//! Domain-separation prefixes. Each distinct use of the hash gets its own
//! tag so values from one protocol role can never collide with another.

pub const DS_PUBLIC_KEY: &[u8] = b"zkutxo:pk:v1";
pub const DS_COMMIT: &[u8] = b"zkutxo:commit:v1";
pub const DS_COMMIT_PAYLOAD: &[u8] = b"zkutxo:commit-payload:v1";
pub const DS_MERKLE_NODE: &[u8] = b"zkutxo:merkle:v1";
pub const DS_BURN: &[u8] = b"zkutxo:burn:v1";
pub const DS_DELEGATE_BIND: &[u8] = b"zkutxo:delegate:v1";
pub const DS_DVP_BIND: &[u8] = b"zkutxo:dvp:v1";
pub const DS_GRABBER_KEY: &[u8] = b"zkutxo:grabkey:v1";
pub const DS_SEAL_TAG: &[u8] = b"zkutxo:seal-tag:v1";
pub const DS_SEAL_NONCE: &[u8] = b"zkutxo:seal-nonce:v1";
pub const DS_SEAL_KEY: &[u8] = b"zkutxo:seal-key:v1";
pub const DS_PROOF: &[u8] = b"zkutxo:proof:v1";
pub const DS_ADDRESS: &[u8] = b"zkutxo:addr:v1";
