//! The edge node: mode, session, command queue with its dispatch gate, and
//! speaker attention, all behind one sans-IO [`EdgeCore`].

pub mod arbiter;
mod engine;
pub mod record;

pub use arbiter::{ArbiterParams, SpeakerArbiter};
pub use engine::{
    EdgeConfig, EdgeCore, EdgeError, EdgeEvent, EdgeSnapshot, EdgeStats, EventKind, GoalPlan, Mode, ModeChange,
    PoseView, SessionView, SpeakerView,
};
pub use record::{accepts, CommandRecord, RecordStatus, Source, Transition};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proto::{
        decode_frame, encode_frame, AckBody, Command, Frame, Liveness, MsgType, OdomBody, SpeakerBody, StatusBody,
        StatusPhase,
    };
    use crate::transport::Endpoint;

    const SID: u32 = 0xabc;
    const MAP: &str = r#"{"resolution": 0.25, "rows": ["....................", "....................",
        "....................", "....................", "....................", "....................",
        "....................", "....................", "....................", "....................",
        "....................", "....................", "....................", "....................",
        "....................", "....................", "....................", "....................",
        "....................", "...................."]}"#;

    /// Hand-driven avatar side of the wire.
    struct Peer {
        seq: u32,
        at: Endpoint,
    }

    impl Peer {
        fn send(&mut self, edge: &mut EdgeCore, msg_type: MsgType, body: Option<serde_json::Value>, now: u64) {
            self.seq += 1;
            let frame = match body {
                Some(b) => Frame::with_json(msg_type, self.seq, SID, &b),
                None => Frame::empty(msg_type, self.seq, SID),
            };
            edge.handle_datagram(&encode_frame(&frame).unwrap(), self.at.clone(), now);
        }

        fn status(&mut self, edge: &mut EdgeCore, cmd_seq: u32, phase: StatusPhase, detail: &str, now: u64) {
            let body = StatusBody { cmd_seq, phase, detail: detail.into(), pose: None };
            self.send(edge, MsgType::CmdStatus, Some(serde_json::to_value(body).unwrap()), now);
        }

        fn ack(&mut self, edge: &mut EdgeCore, ack_seq: u32, now: u64) {
            self.send(edge, MsgType::CmdAck, Some(serde_json::to_value(AckBody { ack_seq }).unwrap()), now);
        }

        fn odom(&mut self, edge: &mut EdgeCore, x: f64, y: f64, theta: f64, now: u64) {
            let body = OdomBody { x, y, theta, t: now };
            self.send(edge, MsgType::Odom, Some(serde_json::to_value(body).unwrap()), now);
        }
    }

    fn connected() -> (EdgeCore, Peer) {
        let mut edge = EdgeCore::new(EdgeConfig::default(), MAP.to_string()).unwrap();
        let mut peer = Peer { seq: 0, at: Endpoint::Mailbox(9) };
        peer.send(&mut edge, MsgType::Hello, None, 0);
        edge.take_outbound();
        (edge, peer)
    }

    fn sent_cmds(edge: &mut EdgeCore) -> Vec<(u32, Command)> {
        edge.take_outbound()
            .into_iter()
            .map(|(_, b)| decode_frame(&b).unwrap())
            .filter(|f| f.msg_type == MsgType::Cmd)
            .map(|f| (f.seq, f.json::<Command>().unwrap()))
            .collect()
    }

    fn statuses(edge: &EdgeCore) -> Vec<RecordStatus> {
        edge.records().iter().map(|r| r.status).collect()
    }

    #[test]
    fn fresh_boot_snapshot() {
        let edge = EdgeCore::new(EdgeConfig::default(), MAP.to_string()).unwrap();
        let snap = serde_json::to_value(edge.snapshot(0)).unwrap();
        assert_eq!(snap["mode"], "manual");
        assert_eq!(snap["session"]["state"], "dead");
        assert!(snap["pose"].is_null());
        assert_eq!(snap["media"], "external");
    }

    #[test]
    fn hello_makes_session_alive() {
        let (edge, _) = connected();
        assert_eq!(edge.liveness(), Liveness::Alive);
        assert_eq!(edge.peer(), Some(&Endpoint::Mailbox(9)));
    }

    #[test]
    fn manual_command_lifecycle() {
        let (mut edge, mut peer) = connected();
        let id = edge.submit_manual(Command::TurnLeft { deg: 15.0 }, 10).unwrap();
        let cmds = sent_cmds(&mut edge);
        assert_eq!(cmds.len(), 1);
        let seq = cmds[0].0;
        peer.ack(&mut edge, seq, 20);
        peer.status(&mut edge, seq, StatusPhase::Executing, "", 21);
        peer.status(&mut edge, seq, StatusPhase::Completed, "", 200);
        let rec = edge.record(id).unwrap();
        let path: Vec<RecordStatus> = rec.transitions.iter().map(|t| t.status).collect();
        assert_eq!(
            path,
            vec![
                RecordStatus::Queued,
                RecordStatus::Dispatched,
                RecordStatus::Delivered,
                RecordStatus::Executing,
                RecordStatus::Completed
            ]
        );
        let snap = edge.snapshot(300);
        assert_eq!(snap.queue.len(), 1);
        assert_eq!(snap.queue[0].status, RecordStatus::Completed);
        assert!(snap.active.is_none());
    }

    #[test]
    fn gate_holds_until_completion() {
        let (mut edge, mut peer) = connected();
        for _ in 0..3 {
            edge.submit_manual(Command::DriveForward { m: 0.5 }, 10).unwrap();
        }
        let first = sent_cmds(&mut edge);
        assert_eq!(first.len(), 1);
        peer.ack(&mut edge, first[0].0, 20);
        // acked but not completed: still gated
        assert!(sent_cmds(&mut edge).is_empty());
        peer.status(&mut edge, first[0].0, StatusPhase::Completed, "", 1000);
        let second = sent_cmds(&mut edge);
        assert_eq!(second.len(), 1);
        assert!(second[0].0 > first[0].0);
        assert_eq!(
            statuses(&edge),
            vec![RecordStatus::Completed, RecordStatus::Dispatched, RecordStatus::Queued]
        );
    }

    #[test]
    fn manual_guards() {
        let mut edge = EdgeCore::new(EdgeConfig::default(), MAP.to_string()).unwrap();
        assert_eq!(edge.submit_manual(Command::Park, 0), Err(EdgeError::SessionDead));
        assert_eq!(edge.emergency_stop(0), Err(EdgeError::SessionDead));
        let (mut edge, _) = connected();
        edge.set_mode(Mode::Auto, 0);
        assert_eq!(edge.submit_manual(Command::Park, 0), Err(EdgeError::WrongMode { required: Mode::Manual }));
        assert!(matches!(edge.submit_manual(Command::TurnLeft { deg: 0.0 }, 0), Err(EdgeError::Malformed(_))));
    }

    #[test]
    fn mode_switch_cancels_other_source() {
        let (mut edge, mut peer) = connected();
        edge.set_mode(Mode::Auto, 0);
        peer.odom(&mut edge, 0.5, 0.5, 0.0, 5);
        let plan = edge.submit_goal(4.5, 0.5, 10).unwrap();
        assert_eq!(plan.count, 9);
        let change = edge.set_mode(Mode::Manual, 20);
        assert_eq!(change, ModeChange { previous: Mode::Auto, cancelled: 8 });
        // the dispatched one is untouched
        assert_eq!(edge.record(plan.id_first).unwrap().status, RecordStatus::Dispatched);
        assert_eq!(edge.set_mode(Mode::Manual, 30), ModeChange { previous: Mode::Manual, cancelled: 0 });
    }

    #[test]
    fn goal_guards_and_supersession() {
        let (mut edge, mut peer) = connected();
        assert_eq!(edge.submit_goal(1.0, 1.0, 0).unwrap_err(), EdgeError::WrongMode { required: Mode::Auto });
        edge.set_mode(Mode::Auto, 0);
        assert_eq!(edge.submit_goal(1.0, 1.0, 0).unwrap_err(), EdgeError::NoPose);
        peer.odom(&mut edge, 0.5, 0.5, 0.0, 5);
        assert!(matches!(edge.submit_goal(9.0, 1.0, 6), Err(EdgeError::Route(_))));
        let first = edge.submit_goal(2.5, 0.5, 10).unwrap();
        assert_eq!(first.count, 5);
        assert_eq!(first.route.path.waypoints.len(), 2);
        let second = edge.submit_goal(0.5, 2.5, 20).unwrap();
        assert_eq!(second.id_first, first.id_first + 5);
        let cancelled = edge.records().iter().filter(|r| r.status == RecordStatus::Cancelled).count();
        assert_eq!(cancelled, 4);
    }

    #[test]
    fn emergency_bypasses_gate() {
        let (mut edge, mut peer) = connected();
        let drive = edge.submit_manual(Command::DriveForward { m: 5.0 }, 0).unwrap();
        edge.submit_manual(Command::Park, 0).unwrap();
        let seq = sent_cmds(&mut edge)[0].0;
        peer.ack(&mut edge, seq, 10);
        peer.status(&mut edge, seq, StatusPhase::Executing, "", 11);
        let stop = edge.emergency_stop(500).unwrap();
        let cmds = sent_cmds(&mut edge);
        assert_eq!(cmds.len(), 1);
        assert_eq!(cmds[0].1, Command::StopDrive);
        // queued park is cancelled, drive still executing until reported
        assert_eq!(edge.record(2).unwrap().status, RecordStatus::Cancelled);
        peer.status(&mut edge, seq, StatusPhase::Failed, "preempted", 520);
        peer.status(&mut edge, cmds[0].0, StatusPhase::Completed, "", 521);
        assert_eq!(edge.record(drive).unwrap().status, RecordStatus::Failed);
        assert_eq!(edge.record(drive).unwrap().detail.as_deref(), Some("preempted"));
        assert_eq!(edge.record(stop).unwrap().status, RecordStatus::Completed);
        assert!(edge.is_idle());
    }

    #[test]
    fn emergency_supersedes_unacked_command() {
        let (mut edge, _) = connected();
        let drive = edge.submit_manual(Command::DriveForward { m: 1.0 }, 0).unwrap();
        edge.emergency_stop(50).unwrap();
        assert_eq!(edge.record(drive).unwrap().status, RecordStatus::Failed);
        assert_eq!(edge.record(drive).unwrap().detail.as_deref(), Some("preempted"));
    }

    #[test]
    fn timeout_then_late_status_ignored() {
        let (mut edge, mut peer) = connected();
        let id = edge.submit_manual(Command::Park, 0).unwrap();
        let seq = sent_cmds(&mut edge)[0].0;
        let mut t = 0;
        while edge.record(id).unwrap().status != RecordStatus::TimedOut {
            t += 10;
            edge.tick(t);
            // keep the session alive with odometry only
            if t % 200 == 0 {
                peer.odom(&mut edge, 0.0, 0.0, 0.0, t);
            }
        }
        assert!((2990..=3010).contains(&t), "timed out at {t}");
        let before = edge.stats().unknown_seq;
        peer.status(&mut edge, seq, StatusPhase::Completed, "", t + 10);
        assert_eq!(edge.record(id).unwrap().status, RecordStatus::TimedOut);
        assert_eq!(edge.stats().unknown_seq, before + 1);
    }

    #[test]
    fn dead_session_fails_in_flight_and_blocks_cmds() {
        let (mut edge, _) = connected();
        let id = edge.submit_manual(Command::Park, 0).unwrap();
        edge.submit_manual(Command::Park, 0).unwrap();
        for t in (10..6000).step_by(10) {
            edge.tick(t);
        }
        assert_eq!(edge.liveness(), Liveness::Dead);
        let r = edge.record(id).unwrap();
        assert!(matches!(r.status, RecordStatus::TimedOut | RecordStatus::Failed));
        assert_eq!(edge.record(2).unwrap().status, RecordStatus::Cancelled);
        edge.take_outbound();
        let sent = edge.stats().cmd_frames_sent;
        assert_eq!(edge.submit_manual(Command::Park, 7000), Err(EdgeError::SessionDead));
        for t in (7000..9000).step_by(10) {
            edge.tick(t);
        }
        assert_eq!(edge.stats().cmd_frames_sent, sent);
    }

    #[test]
    fn odom_relay_is_throttled_and_exact() {
        let (mut edge, mut peer) = connected();
        edge.take_events();
        for t in (0..1000).step_by(50) {
            peer.odom(&mut edge, 1.0, 2.0, 0.5, t);
        }
        let odom: Vec<EdgeEvent> = edge.take_events().into_iter().filter(|e| e.kind == EventKind::Odom).collect();
        assert_eq!(odom.len(), 5);
        assert_eq!(odom[0].data["x"], 1.0);
        assert_eq!(odom[0].data["y"], 2.0);
        assert_eq!(odom[0].data["theta"], 0.5);
    }

    #[test]
    fn speaker_turn_after_dwell() {
        let (mut edge, mut peer) = connected();
        for t in (0..=1250).step_by(250) {
            peer.send(&mut edge, MsgType::SpeakerAngle, Some(serde_json::to_value(SpeakerBody { angle_deg: 70.0 }).unwrap()), t);
        }
        let cmds = sent_cmds(&mut edge);
        assert_eq!(cmds.iter().map(|c| c.1).collect::<Vec<_>>(), vec![Command::TurnLeft { deg: 70.0 }]);
        assert_eq!(edge.records()[0].source, Source::Speaker);
    }

    #[test]
    fn every_transition_emitted_once_in_order() {
        let (mut edge, mut peer) = connected();
        edge.take_events();
        let id = edge.submit_manual(Command::Park, 0).unwrap();
        let seq = sent_cmds(&mut edge)[0].0;
        peer.status(&mut edge, seq, StatusPhase::Completed, "", 10);
        // duplicate status must not re-emit
        peer.status(&mut edge, seq, StatusPhase::Completed, "", 11);
        let seen: Vec<String> = edge
            .take_events()
            .into_iter()
            .filter(|e| e.kind == EventKind::Command && e.data["id"] == id)
            .map(|e| e.data["status"].as_str().unwrap().to_string())
            .collect();
        assert_eq!(seen, ["queued", "dispatched", "delivered", "executing", "completed"]);
    }
}
