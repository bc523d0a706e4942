//! Canonical odometry message and its fixed-size wire encoding.

use super::BusError;

/// Wire magic for the canonical odometry encoding.
pub const ODOM_MAGIC: &[u8; 8] = b"AROSODOM";

/// Encoded size: magic + 49 little-endian f64 fields + two u64 timestamps.
pub const ODOM_WIRE_LEN: usize = 8 + 49 * 8 + 16;

/// Capture timestamp, seconds + nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stamp {
    pub sec: u64,
    pub nsec: u64,
}

/// A robot odometry sample: linear/angular velocity, pose (position +
/// orientation quaternion), 6x6 covariance, and capture stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct OdometryMsg {
    /// Linear velocity, m/s.
    pub lv: [f64; 3],
    /// Angular velocity, rad/s.
    pub av: [f64; 3],
    /// Position xyz followed by orientation quaternion wxyz.
    pub pose: [f64; 7],
    /// Row-major 6x6 covariance.
    pub cov: [f64; 36],
    pub ts: Stamp,
}

impl OdometryMsg {
    /// A zero-motion sample: all velocities zero, identity quaternion.
    pub fn zero_motion(ts: Stamp) -> Self {
        let mut pose = [0.0; 7];
        pose[3] = 1.0; // quaternion w
        OdometryMsg {
            lv: [0.0; 3],
            av: [0.0; 3],
            pose,
            cov: [0.0; 36],
            ts,
        }
    }

    /// Check the message invariants: unit quaternion within 1e-6 and
    /// covariance symmetric within 1e-9.
    pub fn validate(&self) -> Result<(), BusError> {
        let q = &self.pose[3..7];
        let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
            return Err(BusError::InvalidMessage("quaternion is not unit norm"));
        }
        for r in 0..6 {
            for c in 0..r {
                if (self.cov[r * 6 + c] - self.cov[c * 6 + r]).abs() > 1e-9 {
                    return Err(BusError::InvalidMessage("covariance is not symmetric"));
                }
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>, BusError> {
        self.validate()?;
        let mut out = Vec::with_capacity(ODOM_WIRE_LEN);
        out.extend_from_slice(ODOM_MAGIC);
        for v in self
            .lv
            .iter()
            .chain(self.av.iter())
            .chain(self.pose.iter())
            .chain(self.cov.iter())
        {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        out.extend_from_slice(&self.ts.sec.to_le_bytes());
        out.extend_from_slice(&self.ts.nsec.to_le_bytes());
        Ok(out)
    }
}

/// Parse the canonical encoding back into a message.
pub fn parse_odometry(raw: &[u8]) -> Result<OdometryMsg, BusError> {
    if raw.len() != ODOM_WIRE_LEN {
        return Err(BusError::Parse("odometry length mismatch"));
    }
    if &raw[..8] != ODOM_MAGIC {
        return Err(BusError::Parse("bad odometry magic"));
    }
    let mut fields = [0f64; 49];
    for (i, chunk) in raw[8..8 + 49 * 8].chunks_exact(8).enumerate() {
        fields[i] = f64::from_bits(u64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let ts_off = 8 + 49 * 8;
    let msg = OdometryMsg {
        lv: fields[0..3].try_into().unwrap(),
        av: fields[3..6].try_into().unwrap(),
        pose: fields[6..13].try_into().unwrap(),
        cov: fields[13..49].try_into().unwrap(),
        ts: Stamp {
            sec: u64::from_le_bytes(raw[ts_off..ts_off + 8].try_into().unwrap()),
            nsec: u64::from_le_bytes(raw[ts_off + 8..ts_off + 16].try_into().unwrap()),
        },
    };
    msg.validate()?;
    Ok(msg)
}
