pub mod analog;
pub mod device;
pub mod evolution;
pub mod ledger;
pub mod scenario;
pub mod time;
