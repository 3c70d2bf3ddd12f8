#ifndef CMT_FFI_H
#define CMT_FFI_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Values match the `cmt` tool's exit codes.
 */
typedef enum CmtStatus {
  CMT_STATUS_OK = 0,
  CMT_STATUS_SELFTEST_FAILED = 1,
  CMT_STATUS_INVALID_ARGUMENT = 2,
  CMT_STATUS_ACCESS_ERROR = 3,
  CMT_STATUS_NOT_FOUND = 4,
  CMT_STATUS_ISOLATION_DENIED = 5,
  CMT_STATUS_AUTH_ERROR = 6,
  CMT_STATUS_PANIC = 7,
} CmtStatus;

/**
 * Opaque master key handle.
 */
typedef struct CmtMasterKey CmtMasterKey;

/**
 * Opaque open-store handle.
 */
typedef struct CmtStore CmtStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *cmt_last_error_message(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void cmt_string_free(char *s);

/**
 * Encrypts one 16-byte block under a 16-byte key.
 *
 * # Safety
 * `key` and `input` must point to 16 readable bytes, `output` to 16 writable bytes.
 */
enum CmtStatus cmt_aes128_encrypt_block(const uint8_t *key, const uint8_t *input, uint8_t *output);

/**
 * Decrypts one 16-byte block under a 16-byte key.
 *
 * # Safety
 * Same requirements as [`cmt_aes128_encrypt_block`].
 */
enum CmtStatus cmt_aes128_decrypt_block(const uint8_t *key, const uint8_t *input, uint8_t *output);

/**
 * Parses a 32-hex-digit master key.
 *
 * # Safety
 * `hex` must be a NUL-terminated string; `out` must be writable.
 */
enum CmtStatus cmt_master_key_from_hex(const char *hex, struct CmtMasterKey **out);

/**
 * # Safety
 * `key` must be NULL or a handle from [`cmt_master_key_from_hex`] not yet freed.
 */
void cmt_master_key_free(struct CmtMasterKey *key);

/**
 * Writes the tenant's derived encryption and MAC keys (16 bytes each).
 *
 * # Safety
 * `master` must be a live handle, `tenant` a NUL-terminated string, and
 * `enc_key_out` / `mac_key_out` must each point to 16 writable bytes.
 */
enum CmtStatus cmt_derive_tenant_keys(const struct CmtMasterKey *master,
                                      const char *tenant,
                                      uint8_t *enc_key_out,
                                      uint8_t *mac_key_out);

/**
 * Creates a new store file and opens it. The master key is copied.
 *
 * # Safety
 * String arguments must be NUL-terminated; `fields` must hold `field_count`
 * strings; `master` must be a live handle; `out` must be writable.
 */
enum CmtStatus cmt_store_create(const char *path,
                                const char *table,
                                const char *const *fields,
                                size_t field_count,
                                const struct CmtMasterKey *master,
                                struct CmtStore **out);

/**
 * Opens an existing store, replaying its log. The master key is copied.
 *
 * # Safety
 * `path` must be NUL-terminated, `master` a live handle, `out` writable.
 */
enum CmtStatus cmt_store_open(const char *path,
                              const struct CmtMasterKey *master,
                              struct CmtStore **out);

/**
 * Closes a store and releases its lock.
 *
 * # Safety
 * `store` must be NULL or a live handle; it must not be used afterwards.
 */
void cmt_store_free(struct CmtStore *store);

/**
 * Encrypts and appends a row; writes its id to `row_out`.
 *
 * # Safety
 * `store` must be a live handle; `fields` and `values` must each hold
 * `count` NUL-terminated strings; `row_out` must be writable.
 */
enum CmtStatus cmt_store_insert(struct CmtStore *store,
                                const char *tenant,
                                const char *const *fields,
                                const char *const *values,
                                size_t count,
                                uint64_t *row_out);

/**
 * Decrypts one row into `row=<id>` / `field=value` lines.
 *
 * # Safety
 * `store` must be a live handle, `tenant` NUL-terminated, `out` writable.
 * Free the result with [`cmt_string_free`].
 */
enum CmtStatus cmt_store_get(const struct CmtStore *store,
                             const char *tenant,
                             uint64_t row,
                             char **out);

/**
 * Decrypts all of the tenant's rows, ascending by id, in the same line format
 * as [`cmt_store_get`].
 *
 * # Safety
 * Same requirements as [`cmt_store_get`].
 */
enum CmtStatus cmt_store_list(const struct CmtStore *store, const char *tenant, char **out);

/**
 * Replaces every field of an owned row.
 *
 * # Safety
 * Same requirements as [`cmt_store_insert`], without `row_out`.
 */
enum CmtStatus cmt_store_update(struct CmtStore *store,
                                const char *tenant,
                                uint64_t row,
                                const char *const *fields,
                                const char *const *values,
                                size_t count);

/**
 * # Safety
 * `store` must be a live handle and `tenant` NUL-terminated.
 */
enum CmtStatus cmt_store_delete(struct CmtStore *store, const char *tenant, uint64_t row);

/**
 * Runs the self-test suite. `throughput_bytes` of 0 skips the throughput
 * check. When `report_out` is non-NULL it receives the printed report.
 *
 * # Safety
 * `report_out` must be NULL or writable.
 */
enum CmtStatus cmt_selftest(size_t throughput_bytes, char **report_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CMT_FFI_H */
