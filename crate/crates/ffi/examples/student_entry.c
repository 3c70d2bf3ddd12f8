/* Build: cc student_entry.c -I../include -L../../../target/debug -lcmt_ffi */
#include <stdio.h>
#include <stdlib.h>
#include "cmt.h"

static int check(enum CmtStatus st, const char *what) {
    if (st != CMT_STATUS_OK) {
        const char *msg = cmt_last_error_message();
        fprintf(stderr, "%s: status %d (%s)\n", what, (int)st, msg ? msg : "");
        return 0;
    }
    return 1;
}

int main(int argc, char **argv) {
    const char *path = argc > 1 ? argv[1] : "studententry.cmt";
    const char *fields[] = {"name", "contact", "department"};
    const char *values[] = {"N", "C", "D"};
    CmtMasterKey *master = NULL;
    CmtStore *store = NULL;
    uint64_t row = 0;
    char *text = NULL;

    if (!check(cmt_master_key_from_hex("000102030405060708090a0b0c0d0e0f", &master), "master key"))
        return 3;
    if (!check(cmt_store_create(path, "student_entry", fields, 3, master, &store), "create"))
        return 3;
    if (!check(cmt_store_insert(store, "uni_a", fields, values, 3, &row), "insert"))
        return 2;
    if (!check(cmt_store_get(store, "uni_a", row, &text), "get"))
        return 4;
    fputs(text, stdout);
    cmt_string_free(text);

    enum CmtStatus denied = cmt_store_get(store, "uni_b", row, &text);
    printf("cross-tenant status=%d\n", (int)denied);

    cmt_store_free(store);
    cmt_master_key_free(master);
    return denied == CMT_STATUS_ISOLATION_DENIED ? 0 : 1;
}
