#![no_main]

use lagflow::field::SampledField;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(field) = SampledField::read_csv(data) else {
        return;
    };
    let text = field.to_csv_string();
    let back = SampledField::from_csv_str(&text).expect("written CSV reads back");
    assert_eq!(back.shape(), field.shape());
    assert_eq!(back.values().len(), field.values().len());
});
